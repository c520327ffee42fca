//! Seeded synthetic datasets for tests, benchmarks and the `gen` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;

fn names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

/// Uniform draw from the open interval `(lo, hi)`.
fn open_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let v = rng.gen_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}

/// Two-dimensional band: inliers have `x1` in `(-2, 2)`, outliers have `x1`
/// in `(2, 6)` or `(-6, -2)`, split evenly. `x2` is uniform noise in `(-5, 5)`.
pub fn gen_band2d(n_in: usize, n_out: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_in + n_out);
    let mut labels = Vec::with_capacity(n_in + n_out);
    for _ in 0..n_in {
        rows.push(vec![
            open_uniform(&mut rng, -2.0, 2.0),
            open_uniform(&mut rng, -5.0, 5.0),
        ]);
        labels.push(0);
    }
    for k in 0..n_out {
        let x1 = if k % 2 == 0 {
            open_uniform(&mut rng, 2.0, 6.0)
        } else {
            open_uniform(&mut rng, -6.0, -2.0)
        };
        rows.push(vec![x1, open_uniform(&mut rng, -5.0, 5.0)]);
        labels.push(1);
    }
    Dataset::new(names("x", 2), rows, labels).expect("band data is valid")
}

/// Two-dimensional XOR on the signs of `x1` and `x2`.
pub fn gen_xor(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = open_uniform(&mut rng, -1.0, 1.0);
        let x2 = open_uniform(&mut rng, -1.0, 1.0);
        labels.push(usize::from((x1 > 0.0) != (x2 > 0.0)));
        rows.push(vec![x1, x2]);
    }
    Dataset::new(names("x", 2), rows, labels).expect("xor data is valid")
}

/// Uniform features in `[0, 1)^d` labeled positive inside a few random
/// axis-aligned boxes over two attributes each, with `noise` of the labels flipped.
pub fn gen_random(n: usize, d: usize, boxes: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boxes: Vec<[(usize, f64, f64); 2]> = (0..boxes)
        .map(|_| {
            let side = |rng: &mut ChaCha8Rng| {
                let a = rng.gen_range(0..d);
                let lo = rng.gen_range(0.0..0.7);
                (a, lo, lo + rng.gen_range(0.15..0.3))
            };
            [side(&mut rng), side(&mut rng)]
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let inside = boxes
            .iter()
            .any(|b| b.iter().all(|&(a, lo, hi)| row[a] > lo && row[a] <= hi));
        let flip = rng.gen::<f64>() < noise;
        labels.push(usize::from(inside != flip));
        rows.push(row);
    }
    Dataset::new(names("x", d), rows, labels).expect("random data is valid")
}

/// Attribute names of the diabetes-style surrogate.
pub const PIMA_ATTRIBUTES: [&str; 8] = [
    "pregnancies",
    "glucose",
    "blood_pressure",
    "skin_thickness",
    "insulin",
    "bmi",
    "pedigree",
    "age",
];

/// A 768 x 8 surrogate with roughly 35% positives drawn from two
/// subpopulations. Younger patients are positive when glucose is high, older
/// ones when BMI is high; 2% of labels are flipped.
pub fn gen_pima_like(seed: u64) -> Dataset {
    const N: usize = 768;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(N);
    let mut labels = Vec::with_capacity(N);
    for _ in 0..N {
        let older = rng.gen::<f64>() < 0.45;
        let (pregnancies, age, pressure) = if older {
            (
                rng.gen_range(4..=12) as f64,
                rng.gen_range(42.0..70.0),
                rng.gen_range(70.0..95.0),
            )
        } else {
            (
                rng.gen_range(0..=3) as f64,
                rng.gen_range(21.0..35.0),
                rng.gen_range(50.0..75.0),
            )
        };
        let glucose = rng.gen_range(70.0..200.0);
        let skin = rng.gen_range(10.0..50.0);
        let insulin = rng.gen_range(0.0..300.0);
        let bmi = rng.gen_range(20.0..50.0);
        let pedigree = rng.gen_range(0.08..2.4);
        let positive = if older { bmi > 39.5 } else { glucose > 155.0 };
        let flip = rng.gen::<f64>() < 0.02;
        labels.push(usize::from(positive != flip));
        rows.push(vec![pregnancies, glucose, pressure, skin, insulin, bmi, pedigree, age]);
    }
    let attrs = PIMA_ATTRIBUTES.iter().map(|s| s.to_string()).collect();
    Dataset::new(attrs, rows, labels).expect("surrogate data is valid")
}

/// Three classes laid out along `x1` with a second class-2 region at high
/// `x2`; `x3` is noise.
pub fn gen_three_class(n_per_class: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(3 * n_per_class);
    let mut labels = Vec::with_capacity(3 * n_per_class);
    for class in 0..3usize {
        for k in 0..n_per_class {
            let (x1, x2) = match class {
                0 => (rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.8)),
                1 => (rng.gen_range(1.0..2.0), rng.gen_range(0.0..0.8)),
                _ if k % 2 == 0 => (rng.gen_range(2.0..3.0), rng.gen_range(0.0..0.8)),
                _ => (rng.gen_range(0.0..3.0), rng.gen_range(0.8..1.0)),
            };
            rows.push(vec![x1, x2, rng.gen::<f64>()]);
            labels.push(class);
        }
    }
    Dataset::with_class_count(names("x", 3), rows, labels, 3).expect("three-class data is valid")
}
