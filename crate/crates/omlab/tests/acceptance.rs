//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p omlab --test acceptance -- --nocapture` to see
//! the per-criterion lines and timings.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use omlab::decomp::cz_cubes;
use omlab::geometry::{
    cells_of, cover_cube, Domain, DyadicCube, GridFunction, RealCube,
};
use omlab::harness::{
    claim_audits, mr_levelset_identity_check, sweep, weight_lemma_audits, ClaimAuditConfig,
    SweepConfig, SweepMode,
};
use omlab::instances::{gen_instance, InstanceKind, InstanceSpec};
use omlab::orlicz::{dyadic_maximal, luxemburg_average, naive_dyadic_maximal};
use omlab::weights::BkSequence;
use omlab::young::YoungPhi;

fn dom1(cell_exp: i32) -> Domain {
    Domain::new(1, 0, cell_exp).unwrap()
}

fn random_f(d: &Domain, rng: &mut ChaCha8Rng, zero_frac: f64) -> GridFunction {
    let vals: Vec<f64> = (0..d.n_cells())
        .map(|_| if rng.gen_bool(zero_frac) { 0.0 } else { rng.gen_range(0.0..6.0) })
        .collect();
    GridFunction::new(*d, vals).unwrap()
}

#[test]
fn criterion_1_luxemburg_closed_form() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let d = dom1(-6);
    let mut worst: f64 = 0.0;
    for trial in 0..500 {
        let r = [1.0, 2.0, 3.0][trial % 3];
        let phi = YoungPhi::power(r).unwrap();
        let f = random_f(&d, &mut rng, 0.25);
        let gen = rng.gen_range(-6..=0);
        let j = rng.gen_range(0..(1i64 << (-gen)));
        let q = DyadicCube::new(0, gen, [j, 0, 0]);
        let got = luxemburg_average(&f, &q, &phi).unwrap();
        // independent oracle: naive mean of f^r over the cube
        let cells = cells_of(&d, &q).unwrap().indices(&d);
        let mean: f64 =
            cells.iter().map(|&i| f.value(i).powf(r)).sum::<f64>() / cells.len() as f64;
        let expect = mean.powf(1.0 / r);
        let err = if expect > 0.0 { (got - expect).abs() / expect } else { got.abs() };
        worst = worst.max(err);
        assert!(err <= 1e-10, "trial {trial}: {got} vs {expect}");
    }
    assert!(start.elapsed().as_secs_f64() < 5.0, "over the 5 s budget");
    println!(
        "ACCEPTANCE 1 luxemburg-closed-form: PASS (500 cases, worst rel err {:.2e}, {:?})",
        worst,
        start.elapsed()
    );
}

#[test]
fn criterion_2_maximal_operator_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let phis = [
        YoungPhi::new(1.0, 0.0).unwrap(),
        YoungPhi::new(1.0, 1.0).unwrap(),
        YoungPhi::new(2.0, 0.0).unwrap(),
        YoungPhi::new(2.0, 1.0).unwrap(),
    ];
    let mut cases = 0;
    for trial in 0..100 {
        let levels = 1 + (trial % 6) as i32; // 2..64 cells
        let d = dom1(-levels);
        let f = random_f(&d, &mut rng, 0.2);
        let grid = trial % 3;
        for phi in &phis {
            let fast = dyadic_maximal(&f, phi, grid, None).unwrap();
            let slow = naive_dyadic_maximal(&f, phi, grid, None).unwrap();
            assert_eq!(fast.values, slow.values, "trial {trial} grid {grid} phi {phi}");
            cases += 1;
        }
    }
    assert!(start.elapsed().as_secs_f64() < 30.0, "over the 30 s budget");
    println!(
        "ACCEPTANCE 2 maximal-operator-oracle: PASS ({cases} exact matches, {:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_3_cz_decomposition() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let d = dom1(-7);
    for trial in 0..200 {
        let phi = match trial % 4 {
            0 => YoungPhi::new(1.0, 0.0).unwrap(),
            1 => YoungPhi::new(1.0, 1.0).unwrap(),
            2 => YoungPhi::new(2.0, 0.0).unwrap(),
            _ => YoungPhi::new(2.0, 1.0).unwrap(),
        };
        let f = random_f(&d, &mut rng, 0.3);
        let lambda = rng.gen_range(0.02..8.0);
        let cz = cz_cubes(&f, &phi, 0, lambda).unwrap();
        // union equals the maximal-function level set, computed independently
        let field = dyadic_maximal(&f, &phi, 0, None).unwrap();
        for i in 0..d.n_cells() {
            assert_eq!(cz.mask[i], field.value(i) > lambda, "trial {trial} cell {i}");
        }
        // each cube exceeds λ and its parent does not
        for cube in &cz.cubes {
            let avg = luxemburg_average(&f, cube, &phi).unwrap();
            assert!(avg > lambda * (1.0 - 1e-12), "trial {trial}");
            let parent = cube.parent(1).unwrap();
            let pavg = luxemburg_average(&f, &parent, &phi).unwrap();
            assert!(pavg <= lambda * (1.0 + 1e-12), "trial {trial}");
        }
    }
    assert!(start.elapsed().as_secs_f64() < 30.0, "over the 30 s budget");
    println!("ACCEPTANCE 3 cz-decomposition: PASS (200 cases, {:?})", start.elapsed());
}

#[test]
fn criterion_4_covering_theorem() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for dim in [1u8, 2] {
        for trial in 0..1000 {
            let side = f64::exp2(rng.gen_range(-9.0..5.0));
            let mut lo = [0.0; 3];
            for slot in lo.iter_mut().take(dim as usize) {
                *slot = rng.gen_range(-20.0..20.0);
            }
            let q = RealCube { dim, lo, side };
            let (_, q0) = cover_cube(&q).unwrap();
            let qlo = q0.lower(dim).unwrap();
            for a in 0..dim as usize {
                assert!(
                    qlo[a] <= lo[a] && lo[a] + side <= qlo[a] + q0.side(),
                    "dim {dim} trial {trial}: not contained"
                );
            }
            assert!(
                q0.side() <= 3.0 * side * (1.0 + 1e-12),
                "dim {dim} trial {trial}: ratio {}",
                q0.side() / side
            );
        }
    }
    assert!(start.elapsed().as_secs_f64() < 5.0, "over the 5 s budget");
    println!("ACCEPTANCE 4 covering-theorem: PASS (2×1000 cubes, {:?})", start.elapsed());
}

#[test]
fn criterion_5_bk_ratio_bounds() {
    let start = Instant::now();
    let e = std::f64::consts::E;
    let mut checked = 0;
    for a in [e, 3.0, 5.0, 10.0] {
        for r in [1.0, 2.0] {
            for delta in [0.0, 1.0, 2.0] {
                let phi = YoungPhi::new(r, delta).unwrap();
                let seq = BkSequence::new(a, &phi, -40, 40).unwrap();
                let lower = phi.power_r(a);
                let upper = phi.eval(a);
                for k in -40..40 {
                    let ratio = seq.ratio(k);
                    assert!(lower <= ratio && ratio <= upper, "a={a} r={r} δ={delta} k={k}");
                    if delta == 0.0 {
                        assert_eq!(ratio, lower);
                        assert_eq!(ratio, upper);
                    }
                    if k >= 0 {
                        assert_eq!(ratio, lower, "lower endpoint must be exact at k={k}");
                    }
                    if k == -1 && delta > 0.0 {
                        assert_eq!(ratio, upper, "upper endpoint must be exact at k=-1");
                    }
                    checked += 1;
                }
            }
        }
    }
    assert!(start.elapsed().as_secs_f64() < 1.0, "over the 1 s budget");
    println!("ACCEPTANCE 5 bk-ratio-bounds: PASS ({checked} ratios, {:?})", start.elapsed());
}

#[test]
fn criterion_6_weight_lemma_audits() {
    let start = Instant::now();
    let d = dom1(-10);
    let kinds =
        [InstanceKind::Step, InstanceKind::Staircase, InstanceKind::Spike, InstanceKind::RandomBounded];
    let mut total_checks = 0usize;
    let mut substantive = 0usize;
    for seed in 0..100u64 {
        let kind = kinds[(seed % 4) as usize];
        let mut spec = InstanceSpec::new(kind, d);
        spec.r_cert = 2.0;
        let inst = gen_instance(&spec, 600 + seed).unwrap();
        assert!(inst.a1_vr <= 10.0);
        let phi = if seed % 2 == 0 {
            YoungPhi::new(1.0, 0.0).unwrap()
        } else {
            YoungPhi::new(2.0, 1.0).unwrap()
        };
        // place the auxiliary function so the decomposition window is live
        let fv = inst.f.mul(&inst.v).unwrap();
        let t = 2.0 * fv.total().max(1e-9);
        let g = fv.map(|x| x / t).unwrap();
        let checks = weight_lemma_audits(&inst.v, &g, &phi, 0, 1 << 22).unwrap();
        for c in &checks {
            assert!(c.pass, "seed {seed} kind {kind}: {c:?}");
        }
        total_checks += checks.len();
        if checks.len() > 4 {
            substantive += 1;
        }
    }
    assert!(substantive >= 50, "too many empty windows: {substantive}/100");
    assert!(start.elapsed().as_secs_f64() < 120.0, "over the 120 s budget");
    println!(
        "ACCEPTANCE 6 weight-lemma-audits: PASS (100 instances, {total_checks} checks, zero violations, {:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_7_mr_levelset_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let d = dom1(-8);
    for trial in 0..100 {
        let r = [1.0, 2.0, 3.0][trial % 3];
        let f = random_f(&d, &mut rng, 0.3);
        let vv: Vec<f64> = (0..d.n_cells()).map(|_| rng.gen_range(0.3..3.0)).collect();
        let v = GridFunction::new(d, vv).unwrap();
        let t = rng.gen_range(0.05..5.0);
        let (equal, mismatches) = mr_levelset_identity_check(&f, &v, r, t, 0).unwrap();
        assert!(equal, "trial {trial}: {mismatches} mismatched cells");
    }
    assert!(start.elapsed().as_secs_f64() < 30.0, "over the 30 s budget");
    println!("ACCEPTANCE 7 mr-levelset-identity: PASS (100 cases, {:?})", start.elapsed());
}

#[test]
fn criterion_8_main_theorem_sweep() {
    let start = Instant::now();
    let base_1d = SweepConfig {
        schema: "omlab/1".into(),
        mode: SweepMode::Theorem,
        dim: 1,
        box_exp: 0,
        cell_exp: -10,
        instances: 120,
        base_seed: 808,
        kinds: vec![
            InstanceKind::Constant,
            InstanceKind::Step,
            InstanceKind::Staircase,
            InstanceKind::Spike,
            InstanceKind::RandomBounded,
        ],
        r_values: vec![1.0, 2.0],
        delta_values: vec![0.0, 1.0],
        t_count: 12,
        a1_cap: 10.0,
        bound_side: "lower".into(),
        refine: 0,
    };
    let base_2d = SweepConfig {
        dim: 2,
        cell_exp: -6,
        instances: 80,
        base_seed: 809,
        ..base_1d.clone()
    };

    let rep_1d = sweep(&base_1d).unwrap();
    let rep_2d = sweep(&base_2d).unwrap();
    assert!(rep_1d.pass && rep_1d.all_finite, "1-D sweep has non-finite ratios");
    assert!(rep_2d.pass && rep_2d.all_finite, "2-D sweep has non-finite ratios");
    let sup_base = rep_1d.sup_ratio.max(rep_2d.sup_ratio);

    let fine_1d = SweepConfig { refine: 1, ..base_1d.clone() };
    let fine_2d = SweepConfig { refine: 1, ..base_2d.clone() };
    let rep_1f = sweep(&fine_1d).unwrap();
    let rep_2f = sweep(&fine_2d).unwrap();
    assert!(rep_1f.all_finite && rep_2f.all_finite);
    let sup_fine = rep_1f.sup_ratio.max(rep_2f.sup_ratio);
    let drift = (sup_fine - sup_base).abs() / sup_base;
    assert!(drift <= 0.10, "sup_ratio drift {drift:.4} ({sup_base} → {sup_fine})");

    // unweighted dyadic sub-suite: weak (1,1) with constant 1
    let sub = SweepConfig {
        kinds: vec![InstanceKind::Constant],
        r_values: vec![1.0],
        delta_values: vec![0.0],
        bound_side: "dyadic:0".into(),
        instances: 40,
        base_seed: 810,
        refine: 0,
        ..base_1d.clone()
    };
    let rep_sub = sweep(&sub).unwrap();
    assert!(rep_sub.pass);
    assert!(
        rep_sub.sup_ratio <= 1.0 + 1e-12,
        "unweighted dyadic suite exceeded 1: {}",
        rep_sub.sup_ratio
    );

    assert!(start.elapsed().as_secs_f64() < 600.0, "over the 600 s budget");
    println!(
        "ACCEPTANCE 8 main-theorem-sweep: PASS ({} records, sup_ratio {:.4} → {:.4} (drift {:.2}%), sub-suite sup {:.4}, {:?})",
        rep_1d.records.len() + rep_2d.records.len(),
        sup_base,
        sup_fine,
        drift * 100.0,
        rep_sub.sup_ratio,
        start.elapsed()
    );
}

#[test]
fn criterion_9_claim_audits() {
    let start = Instant::now();
    let d = dom1(-10);
    let kinds =
        [InstanceKind::Step, InstanceKind::Staircase, InstanceKind::Spike, InstanceKind::RandomBounded];
    let mut audited = 0usize;
    let mut with_pairs = 0usize;
    let mut analytic_cases = 0usize;
    for seed in 0..50u64 {
        let kind = kinds[(seed % 4) as usize];
        let mut spec = InstanceSpec::new(kind, d);
        spec.r_cert = 2.0;
        let inst = gen_instance(&spec, 900 + seed).unwrap();
        assert!(inst.a1_u <= 10.0 && inst.a1_vr <= 10.0);
        let fv = inst.f.mul(&inst.v).unwrap();
        let t = 2.0 * fv.total().max(1e-9);
        let g = fv.map(|x| x / t).unwrap();

        // δ = 0 with the default base a = 2^n + 1 for most instances; δ = 1
        // with α = 1 + 1/r (so the decay exponent is positive) for the rest
        let (phi, cfg) = if seed % 5 == 4 {
            (
                YoungPhi::new(1.0, 1.0).unwrap(),
                ClaimAuditConfig { alpha: Some(2.0), ..Default::default() },
            )
        } else {
            (YoungPhi::power(1.0 + (seed % 2) as f64).unwrap(), ClaimAuditConfig::default())
        };
        let report = claim_audits(&inst.u, &inst.v, &g, &phi, &cfg).unwrap();
        assert!(report.pass, "seed {seed}: {:#?}", report.checks.iter().find(|c| !c.pass));
        assert!(report.claim1_ratio.is_finite(), "seed {seed}");
        audited += 1;
        if report.n_pairs > 0 {
            with_pairs += 1;
        }

        // analytic special case: u ≡ 1 and δ = 0 force P = G₀
        if phi.delta() == 0.0 {
            let ones = GridFunction::constant(d, 1.0).unwrap();
            let rep1 = claim_audits(&ones, &inst.v, &g, &phi, &cfg).unwrap();
            assert!(rep1.pass, "seed {seed} analytic case");
            // every principal pair sits at forest level 0: the principal and
            // maximal counts agree
            let levels = omlab::decomp::build_omega_levels(
                &inst.v, &g, &phi, rep1.a, 0, None,
            )
            .unwrap();
            let forest = omlab::decomp::principal_forest(
                &levels.families,
                &ones,
                &phi,
                rep1.a,
                rep1.alpha,
                levels.n,
            )
            .unwrap();
            assert!(forest.levels.len() <= 1, "seed {seed}: G₁ nonempty under u ≡ 1, δ = 0");
            analytic_cases += 1;
        }
    }
    assert!(with_pairs >= 25, "too many empty forests: {with_pairs}/50");
    assert!(start.elapsed().as_secs_f64() < 300.0, "over the 300 s budget");
    println!(
        "ACCEPTANCE 9 claim-audits: PASS ({audited} instances, {with_pairs} with live forests, {analytic_cases} analytic P=G0 cases, {:?})",
        start.elapsed()
    );
}
