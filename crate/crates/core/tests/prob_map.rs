use cpnet::data::LandmarkSet;
use cpnet::prob::{make_probability_map, GaussianKernel};
use proptest::prelude::*;

const RES: usize = 64;
/// Kernel radius 12 keeps every stamp inside the map.
const MARGIN: usize = 12;

fn landmarks_at(pixels: &[(usize, usize)]) -> LandmarkSet {
    let scale = (RES - 1) as f64;
    LandmarkSet::new(pixels.iter().map(|&(r, c)| (c as f64 / scale, r as f64 / scale)).collect()).unwrap()
}

fn interior_pixel() -> impl Strategy<Value = (usize, usize)> {
    (MARGIN..RES - MARGIN, MARGIN..RES - MARGIN)
}

fn distinct(pixels: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    let mut p = pixels;
    p.sort_unstable();
    p.dedup();
    p
}

proptest! {
    #[test]
    fn mass_equals_landmark_count(pixels in proptest::collection::vec(interior_pixel(), 1..40)) {
        let pixels = distinct(pixels);
        let map = make_probability_map(&landmarks_at(&pixels), RES, RES, &GaussianKernel::default()).unwrap();
        prop_assert!((map.sum() - pixels.len() as f64).abs() < 1e-6, "sum {} for {}", map.sum(), pixels.len());
    }

    #[test]
    fn disjoint_sets_add(
        a in proptest::collection::vec(interior_pixel(), 1..10),
        b in proptest::collection::vec(interior_pixel(), 1..10),
    ) {
        let a = distinct(a);
        let b: Vec<_> = distinct(b).into_iter().filter(|p| !a.contains(p)).collect();
        prop_assume!(!b.is_empty());
        let k = GaussianKernel::default();
        let union: Vec<_> = a.iter().chain(&b).copied().collect();
        let ma = make_probability_map(&landmarks_at(&a), RES, RES, &k).unwrap();
        let mb = make_probability_map(&landmarks_at(&b), RES, RES, &k).unwrap();
        let mu = make_probability_map(&landmarks_at(&union), RES, RES, &k).unwrap();
        for i in 0..RES * RES {
            prop_assert!((mu.data()[i] - ma.data()[i] - mb.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn shifting_a_landmark_shifts_the_map(
        (r, c) in interior_pixel(),
        dr in -3isize..=3,
        dc in -3isize..=3,
    ) {
        let (r2, c2) = ((r as isize + dr) as usize, (c as isize + dc) as usize);
        prop_assume!((MARGIN..RES - MARGIN).contains(&r2) && (MARGIN..RES - MARGIN).contains(&c2));
        let k = GaussianKernel::default();
        let m1 = make_probability_map(&landmarks_at(&[(r, c)]), RES, RES, &k).unwrap();
        let m2 = make_probability_map(&landmarks_at(&[(r2, c2)]), RES, RES, &k).unwrap();
        for y in 0..RES {
            for x in 0..RES {
                let (sy, sx) = (y as isize - dr, x as isize - dc);
                let expected = if (0..RES as isize).contains(&sy) && (0..RES as isize).contains(&sx) {
                    m1.get(sy as usize, sx as usize)
                } else {
                    0.0
                };
                prop_assert!((m2.get(y, x) - expected).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn single_landmark_peaks_at_its_pixel() {
    let k = GaussianKernel::default();
    let map = make_probability_map(&landmarks_at(&[(30, 20)]), RES, RES, &k).unwrap();
    assert_eq!(map.max(), map.get(30, 20));
    assert!((map.get(30, 20) - k.get(12, 12)).abs() < 1e-15);
    assert!(map.data().iter().all(|&v| v >= 0.0));
}

#[test]
fn border_landmarks_lose_mass() {
    let map = make_probability_map(&landmarks_at(&[(0, 0)]), RES, RES, &GaussianKernel::default()).unwrap();
    assert!(map.sum() < 0.5, "a corner stamp keeps about a quarter of its mass, got {}", map.sum());
}

#[test]
fn empty_set_gives_zero_map() {
    let map = make_probability_map(&LandmarkSet::empty(), RES, RES, &GaussianKernel::default()).unwrap();
    assert_eq!(map.sum(), 0.0);
}
