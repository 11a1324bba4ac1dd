//! Acceptance suite: one PASS/FAIL line per primary criterion, tolerances
//! pinned below. Runs without the libtest harness so the lines always
//! print: `cargo test --test acceptance`.

mod common;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::{Duration, Instant};
use vfguide::calib::synth::{bias_field, evaluate_compensation, gravity_samples, hand_eye_pairs, pivot_poses, registration_set};
use vfguide::calib::{fit_gravity_model, hand_eye_calibrate, pivot_calibrate, register_points};
use vfguide::commands::{experiment, trace_jsonl_bytes, VfMode};
use vfguide::field::{edt_squared, signed_distance, with_threads};
use vfguide::guidance::{compliance_force, parallel_component, per_anatomy_force, ForceLawParams};
use vfguide::robot::{admittance_guided, admittance_hand, Joint, JointKind, RobotModel};
use vfguide::sim::{one_tick_overshoot, peak_hand_force, run_trajectory, ForceScript, Scenario};
use vfguide::transform::RigidTransform;
use vfguide::volume::{
    make_phantom, parse_label_volume, parse_nrrd_header, write_nrrd_bytes, Encoding, Endianness, Grid, LabelVolume,
    NrrdHeader, PhantomSpec, SampleType, Segment, SegmentTable,
};

// Pinned tolerances.
const EDT_GRIDS: usize = 200;
const EDT_MAX_DIM: usize = 32;
const EDT_REL_TOL: f64 = 1e-9;
const EDT_BUDGET: Duration = Duration::from_secs(60);
const SPEEDUP_TARGET: f64 = 2.0;
const CONTINUITY_TOL: f64 = 1e-6;
const DECAY_TOL: f64 = 1e-12;
const CLAMP_PAIRS: usize = 100_000;
const CLAMP_TOL: f64 = 1e-9;
const ADMITTANCE_CASES: usize = 1000;
const JACOBIAN_REL_TOL: f64 = 1e-4;
const NO_BREACH_BUDGET: Duration = Duration::from_secs(120);
const EXACT_TOL: f64 = 1e-9;
const HAND_EYE_BAND: (f64, f64) = (0.05, 0.5);
const REGISTRATION_RMSE: f64 = 0.5;
const TRIAL_PASS_RATE: f64 = 0.95;
const GRAVITY_RESIDUAL: f64 = 0.1;
const GRAVITY_REDUCTION: f64 = 0.9;
const PARSER_CASES: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("edt-exactness", edt_exactness),
        ("parallel-determinism", parallel_determinism),
        ("force-law", force_law),
        ("clamp-guarantee", clamp_guarantee),
        ("admittance-equivalence", admittance_equivalence),
        ("no-breach", no_breach),
        ("calibration-oracles", calibration_oracles),
        ("gravity-compensation", gravity_compensation),
        ("parser-roundtrip", parser_roundtrip),
        ("service-cli-equivalence", service_cli_equivalence),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(name);
        }
    }
    println!("INFO no-breach-stress: {}", jitter_stress());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- distance

fn brute_edt(vol: &LabelVolume, label: u16) -> Vec<f64> {
    let g = vol.grid;
    let sites: Vec<[usize; 3]> = (0..g.len()).filter(|&i| vol.labels[i] == label).map(|i| g.coords(i)).collect();
    (0..g.len())
        .into_par_iter()
        .map(|i| {
            let c = g.coords(i);
            sites
                .iter()
                .map(|s| {
                    (0..3)
                        .map(|a| {
                            let d = (c[a] as f64 - s[a] as f64) * g.spacing[a];
                            d * d
                        })
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn edt_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spacings = [0.25, 0.5, 1.0, 2.0];
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    let mut worst_rel = 0.0f64;
    for _ in 0..EDT_GRIDS {
        let dims = [0, 1, 2].map(|_| rng.random_range(1..=EDT_MAX_DIM));
        let spacing = if rng.random_bool(0.25) { [1.0; 3] } else { [0, 1, 2].map(|_| spacings[rng.random_range(0..4)]) };
        let n: usize = dims.iter().product();
        // keep the oracle's N·M cost bounded
        let density = [0.001f64, 0.01, 0.05, 0.3][rng.random_range(0..4)].min(3000.0 / n as f64);
        let mut labels: Vec<u16> =
            (0..n).map(|_| if rng.random_bool(density) { rng.random_range(1..=3) } else { 0 }).collect();
        let seed_at = rng.random_range(0..n);
        labels[seed_at] = 1;
        let vol = LabelVolume::new(Grid::new(dims, spacing, [0.0; 3]).unwrap(), labels).unwrap();
        for label in vol.present_labels() {
            let got = edt_squared(&vol, label).unwrap();
            let want = brute_edt(&vol, label);
            let exact = spacing == [1.0; 3];
            for (a, b) in got.iter().zip(&want) {
                let ok = if exact || *b == 0.0 { a == b } else { ((a - b) / b).abs() <= EDT_REL_TOL };
                if *b != 0.0 {
                    worst_rel = worst_rel.max(((a - b) / b).abs());
                }
                mismatches += usize::from(!ok);
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed <= EDT_BUDGET,
        format!(
            "{EDT_GRIDS} grids, {checked} label fields, {mismatches} mismatching voxels, worst rel err {worst_rel:.1e}, {:.1} s (budget {} s)",
            elapsed.as_secs_f64(),
            EDT_BUDGET.as_secs()
        ),
    )
}

fn parallel_determinism() -> Outcome {
    let spec: PhantomSpec = serde_json::from_value(serde_json::json!({
        "dims": [128, 128, 128],
        "spacing_mm": [0.25, 0.25, 0.25],
        "primitives": [
            {"kind": "box", "label": 1, "min_mm": [2.0, 2.0, 2.0], "max_mm": [30.0, 30.0, 24.0]},
            {"kind": "sphere", "label": 2, "center_mm": [12.0, 16.0, 10.0], "radius_mm": 5.0},
            {"kind": "capsule", "label": 3, "points_mm": [[4.0, 4.0, 20.0], [16.0, 28.0, 14.0], [28.0, 6.0, 18.0]], "radius_mm": 1.0}
        ]
    }))
    .unwrap();
    let (vol, _) = make_phantom(&spec).unwrap();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let build = |threads: Option<usize>| {
        let t = Instant::now();
        let sdfs: Vec<_> =
            with_threads(threads, || [1u16, 2, 3].map(|l| signed_distance(&vol, l).unwrap())).unwrap().into();
        (t.elapsed().as_secs_f64(), sdfs)
    };
    let (t1, one) = build(Some(1));
    let (_, two) = build(Some(2));
    let (tmax, max) = build(Some(cores));
    let bits = |v: &Vec<vfguide::field::SdfVolume>| -> Vec<u64> {
        v.iter().flat_map(|s| s.values.iter().map(|x| x.to_bits())).collect()
    };
    let identical = bits(&one) == bits(&two) && bits(&one) == bits(&max);
    let speedup = t1 / tmax;
    let perf = if cores >= 4 {
        format!(
            "speedup {speedup:.2}x on {cores} workers ({}; informational, target {SPEEDUP_TARGET}x)",
            if speedup >= SPEEDUP_TARGET { "met" } else { "not met" }
        )
    } else {
        format!("speedup {speedup:.2}x on {cores} workers (fewer than 4 cores, not assessed)")
    };
    outcome(identical, format!("1/2/{cores} workers {} on 128^3, 3 labels; {perf}", if identical { "bit-identical" } else { "DIFFER" }))
}

// ---------------------------------------------------------------- guidance

fn force_law() -> Outcome {
    let p = ForceLawParams::DENTAL_STONE;
    let mut worst_jump = 0.0f64;
    let dir = [0.0, 0.0, 1.0];
    for f_max in [0.1, 1.0, 5.0, 20.0] {
        let below = per_anatomy_force(p.tau0 - 1e-12, dir, true, f_max, &p)[2];
        let at = per_anatomy_force(p.tau0, dir, true, f_max, &p)[2];
        let above = per_anatomy_force(p.tau0 + 1e-12, dir, true, f_max, &p)[2];
        worst_jump = worst_jump.max((below - at).abs().max((above - at).abs()) / f_max);
    }
    let f_max = 5.0;
    let at2 = per_anatomy_force(2.0, dir, true, f_max, &p)[2];
    let expect = f_max * (-1.0f64).exp();
    let decay_err = (at2 - expect).abs();
    let zero_beyond = [p.tauf, p.tauf + 1e-9, p.tauf + 1.0, 1e3]
        .iter()
        .all(|&d| per_anatomy_force(d, dir, true, f_max, &p) == [0.0; 3]);
    outcome(
        worst_jump <= CONTINUITY_TOL && decay_err <= DECAY_TOL && zero_beyond,
        format!(
            "jump at tau0 {worst_jump:.1e}*f_max (tol {CONTINUITY_TOL:.0e}); |F(2 mm)| - f_max/e = {decay_err:.1e} (tol {DECAY_TOL:.0e}); zero at d >= tauf: {zero_beyond}"
        ),
    )
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> [f64; 3] {
    [0, 1, 2].map(|_| rng.random_range(-scale..scale))
}

fn clamp_guarantee() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    let mut violations = 0usize;
    // literal-mode bookkeeping
    let (mut blocked_inward, mut literal_reversals, mut unexpected) = (0usize, 0usize, 0usize);
    for n in 0..CLAMP_PAIRS {
        let fh = random_vec(&mut rng, 10.0);
        let fsdf = if n % 10 == 0 { [0.0; 3] } else { random_vec(&mut rng, 3.0 * (dot(fh, fh)).sqrt()) };
        let par = parallel_component(fh, fsdf);
        let fc = compliance_force(fh, fsdf, false);
        let total: [f64; 3] = std::array::from_fn(|i| fh[i] + fc[i]);
        let m = dot(total, par);
        worst = worst.min(m);
        violations += usize::from(m < -CLAMP_TOL);

        // the printed form swaps the branches: where the default passes F_SDF
        // through, it cancels the parallel part instead, and vice versa
        let lit = compliance_force(fh, fsdf, true);
        let lit_total: [f64; 3] = std::array::from_fn(|i| fh[i] + lit[i]);
        if fsdf == [0.0; 3] {
            unexpected += usize::from(lit != [0.0; 3]);
            continue;
        }
        let keeps = dot(std::array::from_fn(|i| fh[i] + fsdf[i]), par) >= 0.0;
        let toward = dot(fh, fsdf) < 0.0;
        if keeps {
            // default slows the approach; literal stops it dead
            let u_norm = dot(fsdf, fsdf).sqrt();
            let lit_along = dot(lit_total, fsdf) / u_norm;
            if toward {
                blocked_inward += usize::from(lit_along.abs() <= 1e-9 * dot(fh, fh).sqrt().max(1.0));
                unexpected += usize::from(lit_along.abs() > 1e-9 * dot(fh, fh).sqrt().max(1.0));
            }
        } else {
            // literal passes an overpowering F_SDF through and reverses the push
            let rev = dot(lit_total, par) < -CLAMP_TOL;
            literal_reversals += usize::from(rev);
            unexpected += usize::from(!rev && dot(par, par) > 1e-18);
        }
    }
    outcome(
        violations == 0 && unexpected == 0,
        format!(
            "{CLAMP_PAIRS} pairs, min (F_H+F_C).F_H_par = {worst:.2e} (tol -{CLAMP_TOL:.0e}), {violations} violations; literal flag: {blocked_inward} inward pushes fully blocked, {literal_reversals} pushes reversed, {unexpected} cases off the expected difference"
        ),
    )
}

// ---------------------------------------------------------------- robot

fn random_chain(rng: &mut ChaCha8Rng) -> RobotModel {
    let n = rng.random_range(2..=7);
    let joints = (0..n)
        .map(|_| {
            let mut axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if axis.norm() < 0.1 {
                axis = Vector3::z();
            }
            axis.normalize_mut();
            let kind = if rng.random_bool(0.7) { JointKind::Revolute } else { JointKind::Prismatic };
            let origin = RigidTransform::from_axis_angle(
                [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0],
                rng.random_range(-1.5..1.5),
                [rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(0.0..200.0)],
            );
            let lim = if kind == JointKind::Revolute { 3.0 } else { 80.0 };
            Joint { kind, axis: [axis.x, axis.y, axis.z], origin, limits: [-lim, lim] }
        })
        .collect();
    let g = rng.random_range(0.2..3.0);
    RobotModel {
        joints,
        flange: RigidTransform::from_translation([rng.random_range(-50.0..50.0), 0.0, rng.random_range(0.0..80.0)]),
        gains: [g, g, g, 1e-3, 1e-3, 1e-3],
        damping: [1e-6, 1e-3, 1e-2][rng.random_range(0..3)],
    }
}

/// Worst relative difference between analytic Jacobian columns and central
/// differences of forward kinematics, linear and angular blocks separately.
fn jacobian_fd_error(model: &RobotModel, q: &[f64]) -> f64 {
    let jac = model.jacobian(q);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for c in 0..q.len() {
        let (mut qp, mut qm) = (q.to_vec(), q.to_vec());
        qp[c] += h;
        qm[c] -= h;
        let (tp, tm) = (model.forward_kinematics(&qp), model.forward_kinematics(&qm));
        let lin = (tp.translation - tm.translation) / (2.0 * h);
        // small rotation: skew part of Rp·Rmᵀ is [ω·2h]×
        let d = tp.rotation * tm.rotation.transpose();
        let ang = Vector3::new(d[(2, 1)] - d[(1, 2)], d[(0, 2)] - d[(2, 0)], d[(1, 0)] - d[(0, 1)]) / (4.0 * h);
        let col = jac.column(c);
        let jl = Vector3::new(col[0], col[1], col[2]);
        let ja = Vector3::new(col[3], col[4], col[5]);
        worst = worst.max((jl - lin).norm() / jl.norm().max(1.0)).max((ja - ang).norm() / ja.norm().max(1.0));
    }
    worst
}

fn admittance_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0usize;
    let mut worst_fd = 0.0f64;
    for n in 0..ADMITTANCE_CASES {
        let model = match n % 4 {
            0 => RobotModel::gantry(rng.random_range(0.1..5.0), 100.0),
            1 => RobotModel::planar_two_link(rng.random_range(50.0..300.0), rng.random_range(50.0..300.0)),
            2 => RobotModel::six_axis_arm(),
            _ => random_chain(&mut rng),
        };
        let q: Vec<f64> = model.joints.iter().map(|j| rng.random_range(j.limits[0]..j.limits[1])).collect();
        let mut f = random_vec(&mut rng, 10.0);
        if n % 7 == 0 {
            f[rng.random_range(0..3)] = -0.0;
        }
        let a = admittance_hand(&model, &q, f);
        let b = admittance_guided(&model, &q, f, [0.0; 3]);
        if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.to_bits() != y.to_bits()) {
            mismatches += 1;
        }
        worst_fd = worst_fd.max(jacobian_fd_error(&model, &q));
    }
    outcome(
        mismatches == 0 && worst_fd <= JACOBIAN_REL_TOL,
        format!(
            "{ADMITTANCE_CASES} cases (gantry, planar, 6-axis, random chains): {mismatches} not bit-identical; worst Jacobian vs finite difference {worst_fd:.1e} (tol {JACOBIAN_REL_TOL:.0e})"
        ),
    )
}

// ---------------------------------------------------------------- sim

fn no_breach() -> Outcome {
    let start = Instant::now();
    let s = common::bundled("dental_stone_analog.json");
    let tau0 = s.constraints[0].resolved_params().tau0;
    let mut on = s.clone();
    on.vf_enabled = true;
    let mut off = s.clone();
    off.vf_enabled = false;
    let (trace_on, m_on) = run_trajectory(&on).unwrap();
    let (_, m_off) = run_trajectory(&off).unwrap();
    let model = s.robot.model();
    let bound = tau0 - one_tick_overshoot(&model, peak_hand_force(&trace_on), s.dt_s);
    let elapsed = start.elapsed();
    let pass = m_on.total_damage_mm3() == 0.0
        && m_on.min_clearance_mm() >= bound
        && m_off.total_damage_mm3() > 0.0
        && m_on.drilled_volume_mm3 > 0.0
        && elapsed <= NO_BREACH_BUDGET;
    outcome(
        pass,
        format!(
            "VF on: damage {:.3} mm^3, min clearance {:.4} mm (bound {bound:.4}), drilled {:.3} mm^3; VF off: damage {:.3} mm^3, min clearance {:.4} mm; {:.1} s (budget {} s)",
            m_on.total_damage_mm3(),
            m_on.min_clearance_mm(),
            m_on.drilled_volume_mm3,
            m_off.total_damage_mm3(),
            m_off.min_clearance_mm(),
            elapsed.as_secs_f64(),
            NO_BREACH_BUDGET.as_secs()
        ),
    )
}

/// Same paired run with 1 N operator jitter; reported, not judged.
fn jitter_stress() -> String {
    let mut s = common::bundled("dental_stone_analog.json");
    if let ForceScript::Operator(p) = &mut s.force_script {
        p.jitter_n = 1.0;
    }
    let tau0 = s.constraints[0].resolved_params().tau0;
    let (trace, m) = run_trajectory(&s).unwrap();
    let bound = tau0 - one_tick_overshoot(&s.robot.model(), peak_hand_force(&trace), s.dt_s);
    format!(
        "dental run with 1 N jitter: damage {:.3} mm^3, min clearance {:.4} mm vs bound {bound:.4} (clearance creep while sliding; see README)",
        m.total_damage_mm3(),
        m.min_clearance_mm()
    )
}

// ---------------------------------------------------------------- calibration

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn transform_error(a: &RigidTransform, b: &RigidTransform) -> f64 {
    (a.rotation - b.rotation).abs().max().max((a.translation - b.translation).abs().max())
}

fn calibration_oracles() -> Outcome {
    let mut exact_worst = 0.0f64;
    for seed in 0..20 {
        let p = pivot_poses(seed, 12, [10.0, -5.0, 120.0], [30.0, 40.0, -20.0], 0.0);
        let r = pivot_calibrate(&p.poses).unwrap();
        exact_worst = exact_worst.max(dist(r.tip_offset, p.tip_offset)).max(dist(r.pivot_point, p.pivot_point));
        let h = hand_eye_pairs(seed, 10, 0.0);
        let r = hand_eye_calibrate(&h.pairs).unwrap();
        exact_worst = exact_worst.max(transform_error(&r.transform, &h.x));
        let g = registration_set(seed, 8, 0.0);
        let r = register_points(&g.p, &g.q).unwrap();
        exact_worst = exact_worst.max(transform_error(&r.transform, &g.truth));
    }
    let trials = 100u64;
    let (mut he_in, mut he_lo, mut he_hi) = (0u64, f64::INFINITY, 0.0f64);
    let (mut reg_ok, mut reg_worst) = (0u64, 0.0f64);
    for seed in 0..trials {
        let h = hand_eye_pairs(1000 + seed, 30, 0.02);
        let rmse = hand_eye_calibrate(&h.pairs).unwrap().trans_rmse_mm;
        he_in += u64::from(rmse >= HAND_EYE_BAND.0 && rmse <= HAND_EYE_BAND.1);
        he_lo = he_lo.min(rmse);
        he_hi = he_hi.max(rmse);
        let g = registration_set(2000 + seed, 6 + (seed as usize % 5), 0.1);
        let rmse = register_points(&g.p, &g.q).unwrap().rmse;
        reg_ok += u64::from(rmse < REGISTRATION_RMSE);
        reg_worst = reg_worst.max(rmse);
    }
    let need = (TRIAL_PASS_RATE * trials as f64).ceil() as u64;
    outcome(
        exact_worst <= EXACT_TOL && he_in >= need && reg_ok >= need,
        format!(
            "noise-free worst error {exact_worst:.1e} (tol {EXACT_TOL:.0e}); hand-eye sigma 0.02 mm: {he_in}/{trials} rmse in [{}, {}] mm (range {he_lo:.3}-{he_hi:.3}); registration sigma 0.1 mm, 6-10 points: {reg_ok}/{trials} rmse < {REGISTRATION_RMSE} mm (worst {reg_worst:.3})",
            HAND_EYE_BAND.0, HAND_EYE_BAND.1
        ),
    )
}

fn gravity_compensation() -> Outcome {
    let (mut worst_res, mut worst_red) = (0.0f64, f64::INFINITY);
    let seeds = 10u64;
    for seed in 0..seeds {
        let truth = bias_field(100 + seed, 3, 2.0);
        let train = gravity_samples(200 + seed, &truth, 400, 0.05);
        let fitted = fit_gravity_model(&train, 3).unwrap();
        let e = evaluate_compensation(300 + seed, &truth, &fitted, 1000, 0.05);
        worst_res = worst_res.max(e.residual_rms);
        worst_red = worst_red.min(e.energy_reduction);
    }
    outcome(
        worst_res <= GRAVITY_RESIDUAL && worst_red >= GRAVITY_REDUCTION,
        format!(
            "{seeds} seeded bias fields, sigma 0.05 N: worst held-out residual {worst_res:.4} N rms (limit {GRAVITY_RESIDUAL}), worst bias-energy reduction {:.1}% (min {:.0}%)",
            worst_red * 100.0,
            GRAVITY_REDUCTION * 100.0
        ),
    )
}

// ---------------------------------------------------------------- volume io

fn random_name(rng: &mut ChaCha8Rng) -> String {
    let alphabet = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_- ";
    let len = rng.random_range(1..16);
    let s: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())] as char).collect();
    format!("s{}", s.trim_end())
}

fn random_header(rng: &mut ChaCha8Rng) -> NrrdHeader {
    let sample_type = [SampleType::U8, SampleType::U16, SampleType::I16, SampleType::F32][rng.random_range(0..4)];
    let step = |rng: &mut ChaCha8Rng| {
        let v = rng.random_range(1e-3..10.0);
        if rng.random_bool(0.2) {
            -v
        } else {
            v
        }
    };
    let (a, b, c) = (step(rng), step(rng), step(rng));
    let mut custom = Vec::new();
    for n in 0..rng.random_range(0..4) {
        custom.push((format!("Segment{n}_Name"), random_name(rng)));
        custom.push((format!("Segment{n}_LabelValue"), rng.random_range(1..300).to_string()));
        custom.push((format!("Segment{n}_Extent"), "0 9 0 9 0 9".to_string()));
    }
    NrrdHeader {
        version: rng.random_range(1..=5),
        dimension: 3,
        sizes: (0..3).map(|_| rng.random_range(1..400)).collect(),
        sample_type,
        encoding: [Encoding::Raw, Encoding::Ascii, Encoding::Gzip][rng.random_range(0..3)],
        endian: if sample_type.size() > 1 && rng.random_bool(0.5) { Endianness::Big } else { Endianness::Little },
        space: if rng.random_bool(0.7) { Some("left-posterior-superior".into()) } else { None },
        space_directions: [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]],
        space_origin: [0, 1, 2].map(|_| rng.random_range(-500.0..500.0)),
        custom_fields: custom,
        unknown_fields: vec![("kinds".into(), "domain domain domain".into())],
    }
}

fn random_volume(rng: &mut ChaCha8Rng) -> (LabelVolume, SegmentTable) {
    let dims = [0, 1, 2].map(|_| rng.random_range(1..24));
    let spacing = [0, 1, 2].map(|_| [0.25, 0.5, 1.0, 0.26, 1.5][rng.random_range(0..5)]);
    let origin = [0, 1, 2].map(|_| (rng.random_range(-2000..2000) as f64) * 0.125);
    let wide = rng.random_bool(0.3);
    let n_labels: u16 = rng.random_range(1..6);
    let label_of = |k: u16| if wide { 250 + k * 3 } else { k };
    let n: usize = dims.iter().product();
    let labels = (0..n)
        .map(|_| if rng.random_bool(0.4) { 0 } else { label_of(rng.random_range(1..=n_labels)) })
        .collect();
    let segments = (1..=n_labels)
        .map(|k| Segment {
            name: random_name(rng),
            label: label_of(k),
            color: if rng.random_bool(0.5) { Some([0.5, rng.random_range(0..=8) as f64 / 8.0, 0.25]) } else { None },
        })
        .collect();
    let vol = LabelVolume::new(Grid::new(dims, spacing, origin).unwrap(), labels).unwrap();
    (vol, SegmentTable::new(segments).unwrap())
}

const SLICER_HEADER: &str = "NRRD0004\n# Complete NRRD file format specification at:\n# http://teem.sourceforge.net/nrrd/format.html\ntype: unsigned char\ndimension: 3\nspace: right-anterior-superior\nsizes: 2 2 1\nspace directions: (0.5,0,0) (0,0.5,0) (0,0,1.25)\nkinds: domain domain domain\nencoding: raw\nspace origin: (-10,-20,5)\nSegment0_Color:=0.945 0.839 0.568\nSegment0_ColorAutoGenerated:=1\nSegment0_Extent:=0 1 0 1 0 0\nSegment0_ID:=Segment_1\nSegment0_LabelValue:=1\nSegment0_Layer:=0\nSegment0_Name:=mastoid bone\nSegment0_NameAutoGenerated:=0\nSegment0_Tags:=Segmentation.Status:inprogress|\nSegment1_Color:=1 1 0\nSegment1_ID:=Segment_2\nSegment1_LabelValue:=7\nSegment1_Layer:=0\nSegment1_Name:=facial nerve\nSegmentation_ContainedRepresentationNames:=Binary labelmap|\n\n";

fn parser_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut files_ok, mut headers_ok) = (0usize, 0usize);
    for _ in 0..PARSER_CASES {
        let (vol, seg) = random_volume(&mut rng);
        let first = write_nrrd_bytes(&vol, &seg).unwrap();
        let (back, back_seg) = parse_label_volume(&first).unwrap();
        let second = write_nrrd_bytes(&back, &back_seg).unwrap();
        files_ok += usize::from(first == second && back == vol && back_seg == seg);

        let h = random_header(&mut rng);
        let text = h.to_text();
        headers_ok += usize::from(parse_nrrd_header(text.as_bytes()).is_ok_and(|p| p.to_text() == text && p == h));
    }
    let mut bytes = SLICER_HEADER.as_bytes().to_vec();
    bytes.extend_from_slice(&[0, 1, 7, 1]);
    let slicer_ok = match (parse_nrrd_header(&bytes), parse_label_volume(&bytes)) {
        (Ok(h), Ok((vol, seg))) => {
            let reparsed = parse_nrrd_header(h.to_text().as_bytes()).map(|r| r == h).unwrap_or(false);
            reparsed
                && h.custom("Segment0_Tags") == Some("Segmentation.Status:inprogress|")
                && seg.entries
                    == vec![
                        Segment { name: "mastoid bone".into(), label: 1, color: Some([0.945, 0.839, 0.568]) },
                        Segment { name: "facial nerve".into(), label: 7, color: Some([1.0, 1.0, 0.0]) },
                    ]
                && vol.grid.spacing == [0.5, 0.5, 1.25]
                && vol.labels == vec![0, 1, 7, 1]
        }
        _ => false,
    };
    outcome(
        files_ok == PARSER_CASES && headers_ok == PARSER_CASES && slicer_ok,
        format!(
            "{files_ok}/{PARSER_CASES} volumes write-parse-write byte-identical, {headers_ok}/{PARSER_CASES} random headers identical, Slicer SegmentN_* fields {}",
            if slicer_ok { "round-trip" } else { "LOST" }
        ),
    )
}

// ---------------------------------------------------------------- service

fn service_cli_equivalence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = common::scenario_path("dental_stone_analog.json");
    let scenario = Scenario::load(&path).unwrap();
    let start = Instant::now();
    let runs = experiment(&path, VfMode::Scenario, dir.path(), None, false).unwrap();
    let file = std::fs::read(dir.path().join("trace.jsonl")).unwrap();
    let (trace, metrics) = common::replay_over_service(&scenario);
    let same_trace = trace_jsonl_bytes(&trace) == file;
    let same_metrics = metrics == runs[0].metrics;
    outcome(
        same_trace && same_metrics,
        format!(
            "dental_stone_analog over websocket, {} lockstep messages: trace {}, metrics {} ({:.1} s)",
            trace.len(),
            if same_trace { "bit-identical to experiment" } else { "DIFFERS" },
            if same_metrics { "identical" } else { "DIFFER" },
            start.elapsed().as_secs_f64()
        ),
    )
}
