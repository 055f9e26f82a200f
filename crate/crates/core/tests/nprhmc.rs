mod common;

use common::{close, mean_var, Gauss, Step1};
use nphmc::noise::seeded_rng;
use nphmc::nphmc::{np_integrate, Potential, SamplerConfig};
use nphmc::nprhmc::{axis_threshold_oracle, nprhmc_integrate, run_chain, AxisThresholdOracle, BoundaryHit, BoundaryOracle, NoBoundary};
use nphmc::trace::potential;
use nphmc::{CoordKind, Error, State};
use proptest::prelude::*;

fn state(q: &[f64], p: &[f64]) -> State {
    State::new(q.to_vec(), p.to_vec()).unwrap()
}

fn cfg(epsilon: f64, steps: usize) -> SamplerConfig {
    SamplerConfig {
        epsilon,
        steps,
        potential: Potential::Weight,
        trim: false,
        ..Default::default()
    }
}

fn wall(height: f64) -> Step1 {
    Step1 {
        wall: 0.0,
        height,
        kind: CoordKind::Continuous,
    }
}

#[test]
fn axis_oracle_hits() {
    let o = axis_threshold_oracle(vec![Some(0.0)]);
    let hit = o.next_boundary(&[-1.0], &[2.0], 1.0).unwrap();
    assert!((hit.time - 0.5).abs() < 1e-15);
    assert!(hit.before[0] < 0.0 && hit.after[0] >= 0.0);
    assert!(o.next_boundary(&[-1.0], &[-2.0], 1.0).is_none());
    assert!(o.next_boundary(&[-1.0], &[0.5], 1.0).is_none());

    let o = AxisThresholdOracle::new(vec![Some(0.3), Some(0.7), None]);
    let hit = o.next_boundary(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 1.0).unwrap();
    assert!((hit.time - 0.3).abs() < 1e-15);
    let (par, perp) = o.decompose(&hit.after, &[1.0, 2.0, 3.0]);
    assert_eq!(perp, vec![1.0, 0.0, 0.0]);
    assert_eq!(par, vec![0.0, 2.0, 3.0]);
}

#[test]
fn no_boundary_reduces_to_np_integrate() {
    let g = Gauss { dim: 2, mean: 0.4 };
    let s = state(&[0.1, -0.9], &[1.2, 0.3]);
    for potential in [Potential::Weight, Potential::Joint] {
        let c = SamplerConfig { potential, ..cfg(0.1, 15) };
        let a = np_integrate(&s, &g, &c, &mut seeded_rng(0)).unwrap();
        let b = nprhmc_integrate(&s, &g, &NoBoundary, &c, &mut seeded_rng(0)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn refraction_speed() {
    let o = axis_threshold_oracle(vec![Some(0.0)]);
    let s = state(&[-0.1], &[3.0]);
    let (prop, _) = nprhmc_integrate(&s, &wall(2.0), &o, &cfg(0.1, 1), &mut seeded_rng(0)).unwrap();
    assert!((prop.p[0] + 5f64.sqrt()).abs() < 1e-12);
    let t_hit = 0.1 / 3.0;
    assert!((prop.q[0] - 5f64.sqrt() * (0.1 - t_hit)).abs() < 1e-8);
}

#[test]
fn reflection_at_exact_threshold() {
    // p² = 2c: strictly not enough energy, so the particle bounces.
    let o = axis_threshold_oracle(vec![Some(0.0)]);
    let s = state(&[-0.1], &[2.0]);
    let (prop, _) = nprhmc_integrate(&s, &wall(2.0), &o, &cfg(0.1, 1), &mut seeded_rng(0)).unwrap();
    assert_eq!(prop.p, vec![2.0]);
    assert!((prop.q[0] + 0.1).abs() < 1e-8);
}

struct Late;

impl BoundaryOracle for Late {
    fn next_boundary(&self, q: &[f64], _: &[f64], limit: f64) -> Option<BoundaryHit> {
        Some(BoundaryHit {
            time: 2.0 * limit,
            before: q.to_vec(),
            after: q.to_vec(),
        })
    }

    fn decompose(&self, _: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (p.to_vec(), vec![0.0; p.len()])
    }
}

#[test]
fn oracle_contract_violation() {
    let s = state(&[-0.5], &[1.0]);
    let r = nprhmc_integrate(&s, &wall(1.0), &Late, &cfg(0.1, 3), &mut seeded_rng(0));
    assert!(matches!(r, Err(Error::OracleContractViolation { .. })));
}

#[test]
fn chain_on_step_potential() {
    // Target φ(q)·e^{−c[q ≥ 0]}: P(q ≥ 0) = e^{−c} / (1 + e^{−c}).
    let c = SamplerConfig {
        epsilon: 0.2,
        steps: 10,
        n_samples: 20_000,
        burn_in: 500,
        ..Default::default()
    };
    let o = axis_threshold_oracle(vec![Some(0.0)]);
    let xs: Vec<f64> = run_chain(&wall(1.0), &o, &c, &mut seeded_rng(3)).unwrap().samples.iter().map(|s| s.value[0]).collect();
    let frac = xs.iter().filter(|&&x| x >= 0.0).count() as f64 / xs.len() as f64;
    let want = (-1f64).exp() / (1.0 + (-1f64).exp());
    assert!((frac - want).abs() < 0.03, "{frac} vs {want}");
    let (m, _) = mean_var(&xs);
    assert!(m < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn boundary_crossing_conserves_energy(q in -0.5..-0.01f64, p in 0.1..6.0f64, height in -2.0..4.0f64) {
        // With a flat potential on both sides, the total energy after the
        // single crossing equals the energy before it.
        let o = axis_threshold_oracle(vec![Some(0.0)]);
        let m = wall(height);
        let s = state(&[q], &[p]);
        let (prop, _) = nprhmc_integrate(&s, &m, &o, &cfg(0.6, 1), &mut seeded_rng(0)).unwrap();
        let h = |s: &State| potential(&m, &s.q).unwrap() + 0.5 * s.p[0] * s.p[0];
        prop_assert!((h(&prop) - h(&s)).abs() <= 1e-10);
        if prop.q[0] < 0.0 {
            prop_assert_eq!(prop.p[0].abs(), p);
        }
    }

    #[test]
    fn decomposition_sums_to_momentum(q in prop::collection::vec(-2.0..2.0f64, 3), p in prop::collection::vec(-2.0..2.0f64, 3)) {
        let o = AxisThresholdOracle::uniform(0.25);
        let (a, b) = o.decompose(&q, &p);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        prop_assert!(close(&sum, &p, 1e-12));
    }

    #[test]
    fn hits_are_within_limit(q in prop::collection::vec(-2.0..2.0f64, 3), p in prop::collection::vec(-2.0..2.0f64, 3), limit in 0.01..2.0f64) {
        let o = AxisThresholdOracle::uniform(0.25);
        if let Some(hit) = o.next_boundary(&q, &p, limit) {
            prop_assert!(hit.time > 0.0 && hit.time <= limit);
        }
    }
}
