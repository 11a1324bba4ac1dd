//! The work behind each CLI subcommand, callable without a process
//! boundary. Every command is deterministic given its inputs and seed.
//!
//! Exit codes: 0 success, 1 validation, 2 I/O, 3 numerical failure.

use crate::calib::{self, synth, CalibError, GravitySample, MotionPair, RigidTransform};
use crate::field::{signed_distance, write_sdf_cache, FieldError};
use crate::sim::{run_trajectory, Metrics, Scenario, ScenarioError, SimError, TraceRecord};
use crate::volume::{load_label_volume, make_phantom, phantom_warnings, write_nrrd, LabelVolume, PhantomSpec, SegmentTable, VolumeError, BACKGROUND};
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl From<VolumeError> for CliError {
    fn from(e: VolumeError) -> Self {
        match e {
            VolumeError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Io { .. } => CliError::Io(e.to_string()),
            FieldError::Volume(v) => v.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Scenario(s) => s.into(),
            SimError::Volume(v) => v.into(),
            SimError::Field { .. } => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CalibError> for CliError {
    fn from(e: CalibError) -> Self {
        match e {
            CalibError::Degenerate(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// A `.json` path is read as a phantom spec and rasterized; anything else
/// is read as NRRD.
pub fn load_any_volume(path: &Path) -> Result<(LabelVolume, SegmentTable), CliError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let spec: PhantomSpec = parse_json(path, &read_text(path)?)?;
        for w in phantom_warnings(&spec) {
            log::warn!("{w}");
        }
        Ok(make_phantom(&spec)?)
    } else {
        Ok(load_label_volume(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdfStats {
    pub label: u16,
    pub min_mm: f64,
    pub max_mm: f64,
    pub build_ms: f64,
    pub path: PathBuf,
}

pub fn sdf_cache_name(label: u16) -> String {
    format!("sdf_label{label}.vfsdf")
}

/// One cache file per label; empty `labels` means every non-background
/// label present.
pub fn sdf_build(volume_path: &Path, labels: &[u16], out_dir: &Path) -> Result<Vec<SdfStats>, CliError> {
    let (volume, _) = load_any_volume(volume_path)?;
    let labels: Vec<u16> = if labels.is_empty() {
        volume.present_labels().into_iter().filter(|&l| l != BACKGROUND).collect()
    } else {
        labels.to_vec()
    };
    for &l in &labels {
        if !volume.contains_label(l) {
            return Err(CliError::Validation(format!("label {l} is not present in {}", volume_path.display())));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut stats = Vec::new();
    for l in labels {
        let t0 = Instant::now();
        let sdf = signed_distance(&volume, l)?;
        let build_ms = t0.elapsed().as_secs_f64() * 1e3;
        let path = out_dir.join(sdf_cache_name(l));
        write_sdf_cache(&sdf, &path)?;
        let (min_mm, max_mm) = sdf.min_max();
        stats.push(SdfStats { label: l, min_mm, max_mm, build_ms, path });
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSummary {
    pub dims: [usize; 3],
    pub voxel_counts: Vec<(u16, usize)>,
    pub warnings: Vec<String>,
}

pub fn phantom(spec_path: &Path, out: &Path) -> Result<PhantomSummary, CliError> {
    let spec: PhantomSpec = parse_json(spec_path, &read_text(spec_path)?)?;
    let warnings = phantom_warnings(&spec);
    let (volume, segments) = make_phantom(&spec)?;
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    write_nrrd(&volume, &segments, out)?;
    Ok(PhantomSummary {
        dims: volume.grid.dims,
        voxel_counts: volume.present_labels().into_iter().map(|l| (l, volume.count(l))).collect(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibKind {
    Pivot,
    HandEye,
    Register,
    Gravity,
}

/// Synthetic-data knobs used when no input file is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    /// Position noise (mm) or force noise (N for gravity).
    pub noise: f64,
    pub samples: usize,
}

#[derive(Debug, Deserialize)]
struct PivotInput {
    poses: Vec<RigidTransform>,
}

#[derive(Debug, Deserialize)]
struct HandEyeInput {
    pairs: Vec<MotionPair>,
}

#[derive(Debug, Deserialize)]
struct RegisterInput {
    p: Vec<[f64; 3]>,
    q: Vec<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
struct GravityInput {
    samples: Vec<GravitySample>,
    #[serde(default = "default_degree")]
    degree: usize,
}

fn default_degree() -> usize {
    3
}

/// Runs one calibration and returns its report as JSON. With `input`
/// absent the solver is fed seeded synthetic data and the report also
/// carries the ground truth and the recovery error.
pub fn calibrate(kind: CalibKind, input: Option<&Path>, synth_opts: SynthOptions) -> Result<serde_json::Value, CliError> {
    let text = input.map(read_text).transpose()?;
    Ok(match (kind, input.zip(text.as_deref())) {
        (CalibKind::Pivot, Some((p, t))) => json(&calib::pivot_calibrate(&parse_json::<PivotInput>(p, t)?.poses)?),
        (CalibKind::Pivot, None) => {
            let n = synth_opts.samples.max(3);
            let d = synth::pivot_poses(synth_opts.seed, n, [10.0, 5.0, 120.0], [0.0, 0.0, 0.0], synth_opts.noise);
            let r = calib::pivot_calibrate(&d.poses)?;
            let err = (0..3).map(|i| (r.tip_offset[i] - d.tip_offset[i]).powi(2)).sum::<f64>().sqrt();
            serde_json::json!({ "report": r, "truth_tip_offset": d.tip_offset, "tip_error_mm": err })
        }
        (CalibKind::HandEye, Some((p, t))) => json(&calib::hand_eye_calibrate(&parse_json::<HandEyeInput>(p, t)?.pairs)?),
        (CalibKind::HandEye, None) => {
            let d = synth::hand_eye_pairs(synth_opts.seed, synth_opts.samples.max(2), synth_opts.noise);
            let r = calib::hand_eye_calibrate(&d.pairs)?;
            serde_json::json!({
                "report": r,
                "truth": d.x,
                "rotation_error_deg": r.transform.rotation_angle_to(&d.x).to_degrees(),
                "translation_error_mm": (r.transform.translation - d.x.translation).norm(),
            })
        }
        (CalibKind::Register, Some((p, t))) => {
            let inp: RegisterInput = parse_json(p, t)?;
            json(&calib::register_points(&inp.p, &inp.q)?)
        }
        (CalibKind::Register, None) => {
            let d = synth::registration_set(synth_opts.seed, synth_opts.samples.max(3), synth_opts.noise);
            let r = calib::register_points(&d.p, &d.q)?;
            serde_json::json!({
                "report": r,
                "truth": d.truth,
                "rotation_error_deg": r.transform.rotation_angle_to(&d.truth).to_degrees(),
                "translation_error_mm": (r.transform.translation - d.truth.translation).norm(),
            })
        }
        (CalibKind::Gravity, Some((p, t))) => {
            let inp: GravityInput = parse_json(p, t)?;
            json(&calib::fit_gravity_model(&inp.samples, inp.degree)?)
        }
        (CalibKind::Gravity, None) => {
            let truth = synth::bias_field(synth_opts.seed, 3, 2.0);
            let samples = synth::gravity_samples(synth_opts.seed.wrapping_add(1), &truth, synth_opts.samples.max(16), synth_opts.noise);
            let model = calib::fit_gravity_model(&samples, 3)?;
            let eval = synth::evaluate_compensation(synth_opts.seed.wrapping_add(2), &truth, &model, 500, synth_opts.noise);
            serde_json::json!({
                "model": model,
                "heldout_residual_rms_n": eval.residual_rms,
                "uncompensated_rms_n": eval.uncompensated_rms,
                "energy_reduction": eval.energy_reduction,
            })
        }
    })
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable report")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VfMode {
    /// As written in the scenario.
    Scenario,
    On,
    Off,
    /// Both, sharing one seed.
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub dir: PathBuf,
    pub metrics: Metrics,
}

pub fn write_trace_jsonl(trace: &[TraceRecord], path: &Path) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    for r in trace {
        serde_json::to_writer(&mut w, r).expect("serializable record");
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// One JSON record per line, as written by [`write_trace_jsonl`].
pub fn trace_jsonl_bytes(trace: &[TraceRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in trace {
        serde_json::to_writer(&mut out, r).expect("serializable record");
        out.push(b'\n');
    }
    out
}

pub fn read_trace_jsonl(path: &Path) -> Result<Vec<TraceRecord>, CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CliError::Validation(format!("{} line {}: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// CSV columns: `t, q0..q{m-1}, tip_x, tip_y, tip_z, d_<label>..,
/// breach_<label>.., fh_x, fh_y, fh_z, fsdf_x, fsdf_y, fsdf_z, fc_x, fc_y,
/// fc_z, vf`. Labels follow the trace's constraint order.
pub fn write_trace_csv(trace: &[TraceRecord], path: &Path) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    let mut header = vec!["t".to_string()];
    if let Some(first) = trace.first() {
        header.extend((0..first.q.len()).map(|i| format!("q{i}")));
        header.extend(["tip_x", "tip_y", "tip_z"].map(String::from));
        header.extend(first.dist.iter().map(|c| format!("d_{}", c.label)));
        header.extend(first.dist.iter().map(|c| format!("breach_{}", c.label)));
    }
    header.extend(
        ["fh_x", "fh_y", "fh_z", "fsdf_x", "fsdf_y", "fsdf_z", "fc_x", "fc_y", "fc_z", "vf"].map(String::from),
    );
    let io = |e| io_err(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for r in trace {
        let mut row = vec![r.t.to_string()];
        row.extend(r.q.iter().map(f64::to_string));
        row.extend(r.tip.iter().map(f64::to_string));
        row.extend(r.dist.iter().map(|c| c.d.to_string()));
        row.extend(r.dist.iter().map(|c| u8::from(c.breach).to_string()));
        for v in [r.f_h, r.f_sdf, r.f_c] {
            row.extend(v.iter().map(f64::to_string));
        }
        row.push(u8::from(r.vf).to_string());
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn run_one(scenario: &Scenario, dir: &Path, csv: bool) -> Result<ExperimentRun, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let (trace, metrics) = run_trajectory(scenario)?;
    if metrics.anatomies.iter().any(|a| a.min_clearance_mm.is_nan()) || trace.iter().any(|r| r.tip.iter().any(|c| !c.is_finite())) {
        return Err(CliError::Numerical("simulation produced non-finite state".into()));
    }
    write_trace_jsonl(&trace, &dir.join("trace.jsonl"))?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    if csv {
        write_trace_csv(&trace, &dir.join("trace.csv"))?;
    }
    Ok(ExperimentRun { dir: dir.to_path_buf(), metrics })
}

/// Runs a scenario. A paired run writes `vf_on/` and `vf_off/` under
/// `out_dir`; single runs write into `out_dir` directly. `seed` overrides
/// the scenario's seed.
pub fn experiment(
    scenario_path: &Path,
    mode: VfMode,
    out_dir: &Path,
    seed: Option<u64>,
    csv: bool,
) -> Result<Vec<ExperimentRun>, CliError> {
    let mut scenario = Scenario::load(scenario_path)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let mut runs = Vec::new();
    match mode {
        VfMode::Scenario => runs.push(run_one(&scenario, out_dir, csv)?),
        VfMode::On | VfMode::Off => {
            scenario.vf_enabled = mode == VfMode::On;
            runs.push(run_one(&scenario, out_dir, csv)?);
        }
        VfMode::Paired => {
            for (on, sub) in [(true, "vf_on"), (false, "vf_off")] {
                scenario.vf_enabled = on;
                runs.push(run_one(&scenario, &out_dir.join(sub), csv)?);
            }
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnatomyReport {
    pub label: u16,
    pub min_clearance_mm: f64,
    pub breach_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub ticks: usize,
    pub duration_s: f64,
    pub anatomies: Vec<AnatomyReport>,
    /// Ticks where any anatomy is inside τ0.
    pub breach_ticks: u64,
    pub mean_compliance_force_n: f64,
    /// From a `metrics.json` next to the trace, when present.
    pub drilled_volume_mm3: Option<f64>,
    pub damage_volume_mm3: Option<Vec<(u16, f64)>>,
}

impl Report {
    pub fn flagged(&self) -> bool {
        self.breach_ticks > 0 || self.damage_volume_mm3.as_ref().is_some_and(|d| d.iter().any(|(_, v)| *v > 0.0))
    }
}

pub fn summarize(trace: &[TraceRecord]) -> Report {
    let mut anatomies: Vec<AnatomyReport> = trace
        .first()
        .map(|r| r.dist.iter().map(|c| AnatomyReport { label: c.label, min_clearance_mm: f64::INFINITY, breach_ticks: 0 }).collect())
        .unwrap_or_default();
    let mut breach_ticks = 0;
    let mut fc_sum = 0.0;
    for r in trace {
        for (a, c) in anatomies.iter_mut().zip(&r.dist) {
            a.min_clearance_mm = a.min_clearance_mm.min(c.d);
            a.breach_ticks += u64::from(c.breach);
        }
        breach_ticks += u64::from(r.dist.iter().any(|c| c.breach));
        fc_sum += crate::guidance::norm(r.f_c);
    }
    let dt = if trace.len() >= 2 { trace[1].t - trace[0].t } else { 0.0 };
    Report {
        ticks: trace.len(),
        duration_s: trace.len() as f64 * dt,
        anatomies,
        breach_ticks,
        mean_compliance_force_n: if trace.is_empty() { 0.0 } else { fc_sum / trace.len() as f64 },
        drilled_volume_mm3: None,
        damage_volume_mm3: None,
    }
}

pub fn report(trace_path: &Path, csv_out: Option<&Path>) -> Result<Report, CliError> {
    let trace = read_trace_jsonl(trace_path)?;
    let mut rep = summarize(&trace);
    let metrics_path = trace_path.with_file_name("metrics.json");
    if metrics_path.exists() {
        let m: Metrics = parse_json(&metrics_path, &read_text(&metrics_path)?)?;
        rep.drilled_volume_mm3 = Some(m.drilled_volume_mm3);
        rep.damage_volume_mm3 = Some(m.anatomies.iter().map(|a| (a.label, a.damage_volume_mm3)).collect());
    }
    if let Some(csv) = csv_out {
        write_trace_csv(&trace, csv)?;
    }
    Ok(rep)
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ticks: {} ({:.3} s)", self.ticks, self.duration_s)?;
        for a in &self.anatomies {
            writeln!(f, "label {:>3}: min clearance {:>9.4} mm, {} ticks inside tau0", a.label, a.min_clearance_mm, a.breach_ticks)?;
        }
        writeln!(f, "breach ticks (any anatomy): {}", self.breach_ticks)?;
        writeln!(f, "mean |F_C|: {:.4} N", self.mean_compliance_force_n)?;
        match self.drilled_volume_mm3 {
            Some(v) => writeln!(f, "drilled volume: {v:.4} mm^3")?,
            None => writeln!(f, "drilled volume: n/a (no metrics.json beside the trace)")?,
        }
        if let Some(d) = &self.damage_volume_mm3 {
            for (l, v) in d {
                writeln!(f, "damage label {l:>3}: {v:.4} mm^3")?;
            }
        }
        if self.flagged() {
            writeln!(f, "FLAGGED: clearance fell inside tau0 or anatomy was drilled")?;
        }
        Ok(())
    }
}
