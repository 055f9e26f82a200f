mod common;

use std::collections::HashMap;

use common::{close, Flat, Gauss, Stairs};
use nphmc::models::{geometric, two_branch};
use nphmc::noise::{seeded_rng, ChainRng, Noise, Scripted};
use nphmc::npdhmc::{coord_integrator, extend_mixed, npdhmc_integrate, npdhmc_step, CoordMove};
use nphmc::nphmc::{extend, np_integrate, nphmc_step, Potential, SamplerConfig};
use nphmc::trace::potential;
use nphmc::{CoordKind, State, Trace};
use proptest::prelude::*;

fn state(q: &[f64], p: &[f64]) -> State {
    State::new(q.to_vec(), p.to_vec()).unwrap()
}

fn cfg(epsilon: f64, steps: usize, potential: Potential) -> SamplerConfig {
    SamplerConfig {
        epsilon,
        steps,
        potential,
        trim: false,
        ..Default::default()
    }
}

fn laplace_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * x.exp()
    } else {
        1.0 - 0.5 * (-x).exp()
    }
}

#[test]
fn discontinuous_coordinate_appended_at_formula_position() {
    let g = geometric(0.2).unwrap();
    // One site: x₀ = 0 maps to a uniform of 1/2, which is not below 0.2, so
    // the geometric program asks for a second site; x₀ = −3 then ends it.
    let s = state(&[], &[]);
    let mut noise = Scripted::new(0).with_normals([0.0, -3.0]).with_laplaces([1.0, -0.5]);
    let r = extend_mixed(&s, &s, 2.0, &g, &mut noise, &SamplerConfig::default()).unwrap();
    assert_eq!(r.initial.q, vec![0.0, -3.0]);
    assert_eq!(r.initial.p, vec![1.0, -0.5]);
    assert_eq!(r.current.q, vec![2.0, -5.0]);
}

#[test]
fn mixed_extend_equals_gaussian_extend_without_discontinuities() {
    let s = state(&[0.7], &[0.1]);
    let mut ok = 0;
    for seed in 0..20 {
        let a = extend(&s, &s, 1.3, &two_branch(), &mut seeded_rng(seed), &SamplerConfig::default()).ok();
        let b = extend_mixed(&s, &s, 1.3, &two_branch(), &mut seeded_rng(seed), &SamplerConfig::default()).ok();
        ok += a.is_some() as usize;
        assert_eq!(a, b);
    }
    assert!(ok > 0);
}

#[test]
fn appended_discontinuous_momenta_are_laplace() {
    let g = geometric(0.2).unwrap();
    let mut rng = seeded_rng(42);
    let mut ps = Vec::new();
    let s = state(&[], &[]);
    while ps.len() < 10_000 {
        let r = extend_mixed(&s, &s, 0.5, &g, &mut rng, &SamplerConfig::default()).unwrap();
        ps.extend(r.initial.p);
    }
    ps.truncate(10_000);
    ps.sort_by(f64::total_cmp);
    let n = ps.len() as f64;
    let ks = ps
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = laplace_cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks <= 0.05, "KS statistic {ks}");
}

#[test]
fn coordinate_update_rules() {
    let flat = Flat {
        dim: 1,
        kind: CoordKind::Discontinuous,
    };
    let c = cfg(0.5, 1, Potential::Weight);
    let s = state(&[0.2], &[-0.7]);
    let (cur, _, mv) = coord_integrator(&s, &s, 0, 0.0, &flat, &c, &mut seeded_rng(0)).unwrap();
    assert_eq!(mv, CoordMove::Jump);
    assert_eq!(cur.q, vec![-0.3]);
    assert_eq!(cur.p, vec![-0.7]);

    let c = cfg(1.0, 1, Potential::Weight);
    let s = state(&[0.5], &[1.0]);
    let steep = Stairs { dim: 1, slope: 2.0 };
    let (cur, _, mv) = coord_integrator(&s, &s, 0, 0.0, &steep, &c, &mut seeded_rng(0)).unwrap();
    assert_eq!(mv, CoordMove::Reflect);
    assert_eq!(cur, state(&[0.5], &[-1.0]));

    let s = state(&[0.5], &[3.0]);
    let gentle = Stairs { dim: 1, slope: 1.0 };
    let (cur, _, mv) = coord_integrator(&s, &s, 0, 0.0, &gentle, &c, &mut seeded_rng(0)).unwrap();
    assert_eq!(mv, CoordMove::Jump);
    assert_eq!(cur, state(&[1.5], &[2.0]));
}

#[test]
fn coordinate_update_requires_discontinuous_index() {
    let s = state(&[0.1], &[1.0]);
    let c = SamplerConfig::default();
    let g = Gauss { dim: 1, mean: 0.0 };
    assert!(coord_integrator(&s, &s, 0, 0.0, &g, &c, &mut seeded_rng(0)).is_err());
    let flat = Flat {
        dim: 1,
        kind: CoordKind::Discontinuous,
    };
    assert!(coord_integrator(&s, &s, 1, 0.0, &flat, &c, &mut seeded_rng(0)).is_err());
}

#[test]
fn reduces_to_np_integrate_without_discontinuities() {
    let g = Gauss { dim: 3, mean: -0.2 };
    let s = state(&[0.3, -1.0, 2.0], &[0.5, 0.5, -1.5]);
    for potential in [Potential::Weight, Potential::Joint] {
        for trim in [false, true] {
            let c = SamplerConfig {
                trim,
                ..cfg(0.1, 12, potential)
            };
            let a = np_integrate(&s, &g, &c, &mut seeded_rng(1)).unwrap();
            let b = npdhmc_integrate(&s, &g, &c, &mut seeded_rng(1)).unwrap();
            assert_eq!(a, b);
            // Trajectories that leave the first branch and extend.
            let s2 = state(&[-0.4], &[1.5]);
            let c = SamplerConfig { steps: 4, ..c };
            let mut extended = 0;
            for seed in 0..100 {
                let a = np_integrate(&s2, &two_branch(), &c, &mut seeded_rng(seed)).ok();
                let b = npdhmc_integrate(&s2, &two_branch(), &c, &mut seeded_rng(seed)).ok();
                extended += a.as_ref().is_some_and(|(q, _)| q.len() == 2) as usize;
                assert_eq!(a, b);
            }
            assert!(extended > 0);
        }
    }
}

#[test]
fn pure_sign_dynamics_on_flat_density() {
    let flat = Flat {
        dim: 3,
        kind: CoordKind::Discontinuous,
    };
    let s = state(&[0.1, -0.2, 1.0], &[0.3, -2.0, 0.01]);
    let (prop, init) = npdhmc_integrate(&s, &flat, &cfg(0.1, 5, Potential::Weight), &mut seeded_rng(3)).unwrap();
    assert!(close(&prop.q, &[0.6, -0.7, 1.5], 1e-12));
    assert_eq!(prop.p, vec![-0.3, 2.0, -0.01]);
    assert_eq!(init, s);
}

#[test]
fn step_matches_nphmc_without_discontinuities() {
    let g = Gauss { dim: 2, mean: 1.0 };
    let c = cfg(0.2, 8, Potential::Joint);
    let mut q = Trace::new(vec![0.0, 0.5]).unwrap();
    for i in 0..30 {
        let a = nphmc_step(&q, &g, &c, &mut seeded_rng(i)).unwrap();
        let b = npdhmc_step(&q, &g, &c, &mut seeded_rng(i)).unwrap();
        assert_eq!(a, b);
        q = a.trace;
    }
}

#[test]
fn zero_steps_always_accept() {
    let g = geometric(0.2).unwrap();
    let q = Trace::new(vec![0.4, -2.0]).unwrap();
    for laplace_density in [true, false] {
        let c = SamplerConfig {
            laplace_density,
            ..cfg(0.1, 0, Potential::Joint)
        };
        for i in 0..20 {
            let s = npdhmc_step(&q, &g, &c, &mut seeded_rng(i)).unwrap();
            assert!(s.accepted);
            assert_eq!(s.trace, q);
        }
    }
}

/// Forwards draws to a seeded RNG and records every permutation it produces.
struct Recording {
    rng: ChainRng,
    orders: Vec<Vec<usize>>,
}

impl Noise for Recording {
    fn normal(&mut self) -> f64 {
        self.rng.normal()
    }

    fn uniform(&mut self) -> f64 {
        Noise::uniform(&mut self.rng)
    }

    fn shuffle(&mut self, items: &mut [usize]) {
        self.rng.shuffle(items);
        self.orders.push(items.to_vec());
    }
}

#[test]
fn sweep_orders_are_uniform() {
    let flat = Flat {
        dim: 4,
        kind: CoordKind::Discontinuous,
    };
    let c = cfg(0.1, 1, Potential::Weight);
    let mut noise = Recording {
        rng: seeded_rng(8),
        orders: Vec::new(),
    };
    let s = state(&[0.1, 0.2, 0.3, 0.4], &[1.0, -1.0, 1.0, -1.0]);
    for _ in 0..10_000 {
        npdhmc_integrate(&s, &flat, &c, &mut noise).unwrap();
    }
    assert_eq!(noise.orders.len(), 10_000);
    let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
    for o in &noise.orders {
        *freq.entry(o.clone()).or_default() += 1;
    }
    assert_eq!(freq.len(), 24);
    for (o, n) in freq {
        let f = n as f64 / 10_000.0;
        assert!((f - 1.0 / 24.0).abs() <= 0.01, "{o:?}: {f}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn coordinate_update_conserves_energy(
        q in prop::collection::vec(-3.0..3.0f64, 3),
        p in prop::collection::vec(-4.0..4.0f64, 3),
        j in 0usize..3,
        eps in 0.05..1.5f64,
        slope in 0.1..3.0f64,
    ) {
        let m = Stairs { dim: 3, slope };
        let s = state(&q, &p);
        let (cur, init, _) = coord_integrator(&s, &s, j, 0.0, &m, &cfg(eps, 1, Potential::Weight), &mut seeded_rng(0)).unwrap();
        prop_assert_eq!(cur.len(), 3);
        prop_assert_eq!(&init, &s);
        let h = |s: &State| potential(&m, &s.q).unwrap() + s.p.iter().map(|x| x.abs()).sum::<f64>();
        prop_assert!((h(&cur) - h(&s)).abs() <= 1e-10);
    }
}
