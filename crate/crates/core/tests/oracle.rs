//! Checks the cylinder-basis model against a direct quadrature of
//! `f ↦ f∘γᵢ` and its adjoint on Lebesgue-measure systems.

mod common;

use common::c;
use fractal_cuntz::ifs::{IfsSystem, Word};
use fractal_cuntz::opspace::{CylinderSpace, LeveledVector};

const GRID: usize = 1 << 14;

/// Maps written out by hand; independent of `IfsSystem`.
fn example_maps(tent: bool) -> [fn(f64) -> f64; 2] {
    if tent {
        [|x| x / 2.0, |x| 1.0 - x / 2.0]
    } else {
        [|x| x / 2.0, |x| x / 2.0 + 0.5]
    }
}

fn example_inverses(tent: bool) -> [fn(f64) -> f64; 2] {
    if tent {
        [|y| 2.0 * y, |y| 2.0 - 2.0 * y]
    } else {
        [|y| 2.0 * y, |y| 2.0 * y - 1.0]
    }
}

fn cell_interval(tent: bool, w: &Word) -> (f64, f64) {
    let maps = example_maps(tent);
    let (mut a, mut b) = (0.0, 1.0);
    for &l in w.letters().iter().rev() {
        let (p, q) = (maps[l - 1](a), maps[l - 1](b));
        a = p.min(q);
        b = p.max(q);
    }
    (a, b)
}

/// Sampled on grid midpoints: `2^{k/2}` on the cell of `w`, zero elsewhere.
fn basis_function(tent: bool, w: &Word) -> Vec<f64> {
    let (a, b) = cell_interval(tent, w);
    let h = 2f64.powf(w.len() as f64 / 2.0);
    grid()
        .map(|x| if x > a && x < b { h } else { 0.0 })
        .collect()
}

fn grid() -> impl Iterator<Item = f64> {
    (0..GRID).map(|j| (j as f64 + 0.5) / GRID as f64)
}

fn sample_at(values: &[f64], x: f64) -> f64 {
    let j = ((x * GRID as f64).floor() as usize).min(GRID - 1);
    values[j]
}

fn project(tent: bool, values: &[f64], level: usize) -> Vec<f64> {
    Word::all(2, level)
        .map(|w| {
            let e = basis_function(tent, &w);
            e.iter().zip(values).map(|(a, b)| a * b).sum::<f64>() / GRID as f64
        })
        .collect()
}

fn system(tent: bool) -> IfsSystem {
    if tent {
        IfsSystem::example9_tent()
    } else {
        IfsSystem::example8()
    }
}

#[test]
fn composition_operator_matches_quadrature() {
    let sp = CylinderSpace::new(2);
    for tent in [false, true] {
        let maps = example_maps(tent);
        for k in 1..=4 {
            for w in Word::all(2, k) {
                let f = basis_function(tent, &w);
                for i in 1..=2 {
                    let g: Vec<f64> = grid().map(|x| sample_at(&f, maps[i - 1](x))).collect();
                    let expected = project(tent, &g, k - 1);
                    let got = sp
                        .composition_operator(i, &LeveledVector::basis(2, &w))
                        .unwrap();
                    assert_eq!(got.level(), k - 1);
                    for (e, g) in expected.iter().zip(got.coeffs()) {
                        assert!((g - c(*e)).norm() < 1e-9, "tent={tent} w={w} i={i}");
                    }
                }
            }
        }
    }
}

#[test]
fn isometry_matches_quadrature_of_adjoint() {
    // Vᵢ f = √2 · f∘γᵢ⁻¹ on γᵢ[0,1], zero elsewhere.
    let sp = CylinderSpace::new(2);
    for tent in [false, true] {
        let maps = example_maps(tent);
        let inv = example_inverses(tent);
        for k in 0..=3 {
            for w in Word::all(2, k) {
                let f = basis_function(tent, &w);
                for i in 1..=2 {
                    let (lo, hi) = {
                        let (p, q) = (maps[i - 1](0.0), maps[i - 1](1.0));
                        (p.min(q), p.max(q))
                    };
                    let g: Vec<f64> = grid()
                        .map(|y| {
                            if y > lo && y < hi {
                                2f64.sqrt() * sample_at(&f, inv[i - 1](y))
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let expected = project(tent, &g, k + 1);
                    let got = sp.apply_isometry(i, &LeveledVector::basis(2, &w)).unwrap();
                    for (e, g) in expected.iter().zip(got.coeffs()) {
                        assert!((g - c(*e)).norm() < 1e-9, "tent={tent} w={w} i={i}");
                    }
                }
            }
        }
    }
}

#[test]
fn cells_agree_with_system_geometry() {
    for tent in [false, true] {
        let sys = system(tent);
        for k in 0..=5 {
            for w in Word::all(2, k) {
                let (a, b) = cell_interval(tent, &w);
                let bx = sys.cell_box(&w).unwrap();
                assert!((bx.lo[0] - a).abs() < 1e-15 && (bx.hi[0] - b).abs() < 1e-15);
                let mid = sys.address(&[(a + b) / 2.0], k).unwrap();
                assert_eq!(mid, w);
            }
        }
    }
}
