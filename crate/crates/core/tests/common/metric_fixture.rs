//! Image pairs shared with `fixtures/make_metric_reference.py` and the
//! scikit-image scores recorded for them.

use cpnet::data::Image;
use serde_json::Value;

const FIXTURE: &str = include_str!("../fixtures/metric_reference.json");

/// The 64-bit LCG shared with the fixture script.
struct Lcg(u64);

impl Lcg {
    fn byte(&mut self) -> i64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 56) as i64
    }
}

fn reference_pair(index: usize, (c, h, w): (usize, usize, usize)) -> (Image, Image) {
    let mut rng = Lcg(1000 + index as u64);
    let amp = 1 + (index % 8) as i64;
    let n = c * h * w;
    let a: Vec<i64> = (0..n).map(|_| rng.byte()).collect();
    let noise: Vec<i64> = (0..n).map(|_| rng.byte()).collect();
    let b: Vec<i64> = a
        .iter()
        .zip(&noise)
        .map(|(&x, &e)| (x + ((e - 128) * amp).div_euclid(8)).clamp(0, 255))
        .collect();
    let to_image = |v: &[i64]| Image::new(c, h, w, v.iter().map(|&x| x as f32 / 256.0).collect()).unwrap();
    (to_image(&a), to_image(&b))
}

pub struct Expected {
    pub ssim: f64,
    pub psnr: f64,
}

/// Every fixture pair with its reference scores.
pub fn reference() -> Vec<(Image, Image, Expected)> {
    let fixture: Value = serde_json::from_str(FIXTURE).unwrap();
    let shape: Vec<usize> = fixture["shape"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    fixture["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (a, b) = reference_pair(i, (shape[0], shape[1], shape[2]));
            let expected = Expected {
                ssim: e["ssim"].as_f64().unwrap(),
                psnr: e["psnr"].as_f64().unwrap(),
            };
            (a, b, expected)
        })
        .collect()
}
