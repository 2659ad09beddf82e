use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dynsec::classify::{classify, Decision, Semantics, SystemClassification};
use dynsec::decouple::{apply_filter, design_residual_generator, ResidualGenerator};
use dynsec::identify::{identify, scoring_window};
use dynsec::index::{security_index, security_index_greedy, synthesize_attack, Alpha, Method, SecurityIndexResult};
use dynsec::model::{validate, ValidationReport};
use dynsec::pencil::{invariant_zeros, PencilSelection};
use dynsec::sim::{horizon_cap, simulate, verify_undetectable, Trace, Undetectability};
use dynsec::{RealizationF64 as Realization, Settings, Tolerances};
use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::args::{Command, Global, TraceKind};
use crate::io::{load_model, parse_list, read_trace, trace_csv, write_file, CliError, CliResult};

/// A finished run: the JSON report and its text rendering.
#[derive(Debug)]
pub struct Output {
    pub json: String,
    pub text: String,
}

#[derive(Serialize, Default)]
struct Tol {
    rank_rtol: f64,
    null_tol: f64,
    boundary_tol: f64,
    pole_tol: f64,
    target_tol: f64,
    support_tol: f64,
    pairing_tol: f64,
    zero_merge_tol: f64,
    consistency_tol: f64,
    noise_floor: f64,
}

impl From<&Tolerances> for Tol {
    fn from(t: &Tolerances) -> Self {
        Tol {
            rank_rtol: t.rank_rtol,
            null_tol: t.null_tol,
            boundary_tol: t.boundary_tol,
            pole_tol: t.pole_tol,
            target_tol: t.target_tol,
            support_tol: t.support_tol,
            pairing_tol: t.pairing_tol,
            zero_merge_tol: t.zero_merge_tol,
            consistency_tol: t.consistency_tol,
            noise_floor: t.noise_floor,
        }
    }
}

/// Effective configuration echoed into every report.
#[derive(Serialize, Default)]
struct Config {
    command: &'static str,
    model: Option<String>,
    seed: u64,
    tolerances: Tol,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
}

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    config: &'a Config,
    warnings: &'a [String],
    result: &'a R,
}

#[derive(Serialize, Clone, Copy)]
struct Cplx {
    re: f64,
    im: f64,
}

impl From<Complex<f64>> for Cplx {
    fn from(z: Complex<f64>) -> Self {
        Cplx { re: z.re, im: z.im }
    }
}

impl std::fmt::Display for Cplx {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.im == 0.0 {
            write!(f, "{}", self.re)
        } else {
            write!(f, "{}{:+}i", self.re, self.im)
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn settings(g: &Global) -> CliResult<Settings> {
    let mut s = Settings::default();
    if let Some(seed) = g.seed {
        s.seed = seed;
    }
    let overrides = [
        (g.tol, &mut s.tol.rank_rtol),
        (g.null_tol, &mut s.tol.null_tol),
        (g.boundary_tol, &mut s.tol.boundary_tol),
        (g.consistency_tol, &mut s.tol.consistency_tol),
    ];
    for (value, slot) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(field) = s.tol.invalid_field() {
        return Err(CliError::Input(format!("tolerance {field} must be positive and finite")));
    }
    Ok(s)
}

/// Loads the model and checks its assumptions. A rank-deficient `C` only
/// produces a warning; any other violation stops the run.
fn checked_model(g: &Global, s: &Settings, warnings: &mut Vec<String>) -> CliResult<(Realization, ValidationReport<f64>)> {
    let model = load_model(g.model.as_deref())?;
    let report = validate(&model, &s.tol)?;
    let mut fatal = Vec::new();
    for c in &report.violated_assumptions {
        if c.name == "rank C = p" {
            warnings.push(format!("{} violated (rank {} < {}); results assume it", c.name, c.measured_rank, c.required_rank));
        } else {
            fatal.push(format!("{} (rank {} < {})", c.name, c.measured_rank, c.required_rank));
        }
    }
    if !fatal.is_empty() {
        return Err(dynsec::Error::Hypothesis(format!("model violates {}", fatal.join(", "))).into());
    }
    Ok((model, report))
}

pub fn run(g: &Global, command: &Command) -> CliResult<Output> {
    let s = settings(g)?;
    let mut config = Config {
        model: g.model.as_ref().map(|p| p.display().to_string()),
        seed: s.seed,
        tolerances: Tol::from(&s.tol),
        ..Config::default()
    };
    let mut warnings = Vec::new();
    match command {
        Command::Validate => {
            config.command = "validate";
            let model = load_model(g.model.as_deref())?;
            let r = validate(&model, &s.tol)?;
            let out = ValidateOut::new(&model, &r);
            let report = finish(&config, &warnings, &out)?;
            if !r.passed {
                let names: Vec<&str> = r.violated_assumptions.iter().map(|c| c.name).collect();
                let cause = dynsec::Error::Hypothesis(format!("model violates {}", names.join(", ")));
                return Err(CliError::Rejected { report: Box::new(report), cause });
            }
            Ok(report)
        }
        Command::Zeros { support } => {
            config.command = "zeros";
            let (model, _) = checked_model(g, &s, &mut warnings)?;
            let support: Vec<usize> = match support {
                Some(text) => parse_list("--support", text)?,
                None => (0..model.m()).collect(),
            };
            let sel = PencilSelection::new(&model, support.clone())?;
            let z = invariant_zeros(&sel, &s)?;
            let out = ZerosOut {
                support,
                normalrank: z.normalrank,
                generically_rank_deficient: z.generically_rank_deficient,
                zeros: z
                    .zeros
                    .iter()
                    .map(|r| ZeroOut { re: r.z.re, im: r.z.im, persistent: r.persistent, rank_at_z: r.rank_at_z })
                    .collect(),
            };
            finish(&config, &warnings, &out)
        }
        Command::Index { channel, qmax, greedy } => {
            config.command = "index";
            config.channel = *channel;
            let (model, _) = checked_model(g, &s, &mut warnings)?;
            let q_max = qmax.unwrap_or(model.m());
            config.q_max = Some(q_max);
            let channels: Vec<usize> = match channel {
                Some(i) => vec![*i],
                None => (0..model.m()).collect(),
            };
            let results = channels
                .iter()
                .map(|&i| if *greedy { security_index_greedy(&model, i, &s) } else { security_index(&model, i, q_max, &s) })
                .collect::<dynsec::Result<Vec<_>>>()?;
            let out = IndexOut { channels: results.iter().map(|r| IndexRecord::new(&model, r, g.timings)).collect() };
            finish(&config, &warnings, &out)
        }
        Command::Classify { q, qmax, asymptotic } => {
            config.command = "classify";
            config.q = Some(*q);
            let (model, report) = checked_model(g, &s, &mut warnings)?;
            let q_max = qmax.unwrap_or(model.m());
            config.q_max = Some(q_max);
            let semantics = if *asymptotic { Semantics::Asymptotic } else { Semantics::Exact };
            let results = (0..model.m()).map(|i| security_index(&model, i, q_max, &s)).collect::<dynsec::Result<Vec<_>>>()?;
            let c = classify(&results, *q, semantics, report.is_schur)?;
            finish(&config, &warnings, &ClassifyOut::new(&model, &c))
        }
        Command::Synth { channel, horizon, qmax, attack_out, disturbance_out } => {
            config.command = "synth";
            config.channel = Some(*channel);
            config.horizon = Some(*horizon);
            let (model, _) = checked_model(g, &s, &mut warnings)?;
            let q_max = qmax.unwrap_or(model.m());
            config.q_max = Some(q_max);
            let r = security_index(&model, *channel, q_max, &s)?;
            let Some(w) = r.witness.as_ref() else {
                return Err(dynsec::Error::Contract(format!("channel {channel} admits no undetectable attack on up to {q_max} channels (alpha {})", r.alpha)).into());
            };
            let used = horizon_cap(&model, w.z0.norm(), *horizon)?;
            if used < *horizon {
                warnings.push(format!("horizon capped at {used} samples to bound rounding growth"));
            }
            let sig = synthesize_attack(w, used)?;
            let check = verify_undetectable(&model, w, used, Undetectability::Exact, &s.tol)?;
            let attack = emit_trace(&sig.a, attack_out.as_deref())?;
            let disturbance = emit_trace(&sig.d, disturbance_out.as_deref())?;
            let out = SynthOut {
                channel: *channel,
                alpha: AlphaOut::from(r.alpha),
                support: w.support.clone(),
                z0: w.z0.into(),
                horizon: used,
                x0: sig.x0.iter().copied().collect(),
                undetectable: check.undetectable,
                max_output: check.max_output,
                scale: check.scale,
                attack,
                disturbance,
            };
            finish(&config, &warnings, &out)
        }
        Command::Filter { limp } => {
            config.command = "filter";
            let (model, _) = checked_model(g, &s, &mut warnings)?;
            let gen = design_residual_generator(&model, *limp, &s)?;
            finish(&config, &warnings, &FilterOut::new(&gen))
        }
        Command::Apply { trace, residual_out } => {
            config.command = "apply";
            let (model, _) = checked_model(g, &s, &mut warnings)?;
            let y = read_trace(trace)?;
            let gen = design_residual_generator(&model, None, &s)?;
            let res = apply_filter(&gen, &y)?;
            let out = ApplyOut {
                samples: y.len(),
                residual_channels: res.r.channels(),
                warmup: res.warmup,
                residual: emit_trace(&res.r, residual_out.as_deref())?,
            };
            finish(&config, &warnings, &out)
        }
        Command::Simulate { x0, d, a, horizon, y_out } => {
            config.command = "simulate";
            let (model, _) = checked_model(g, &s, &mut warnings)?;
            let d = d.as_deref().map(read_trace).transpose()?;
            let a = a.as_deref().map(read_trace).transpose()?;
            let available = [d.as_ref(), a.as_ref()].into_iter().flatten().map(Trace::len).min();
            let n_samples = match (horizon, available) {
                (Some(h), _) => *h,
                (None, Some(len)) => len,
                (None, None) => return Err(CliError::Input("--horizon is required without input traces".into())),
            };
            config.horizon = Some(n_samples);
            let x0 = match x0 {
                Some(text) => DVector::from_vec(parse_list::<f64>("--x0", text)?),
                None => DVector::zeros(model.n()),
            };
            let d = d.unwrap_or_else(|| Trace::zeros(model.o(), n_samples));
            let a = a.unwrap_or_else(|| Trace::zeros(model.m(), n_samples));
            let sim = simulate(&model, &x0, &d, &a, n_samples)?;
            let out = SimulateOut {
                horizon: n_samples,
                x_final: sim.x_final.iter().copied().collect(),
                max_output: sim.y.max_norm(),
                y: emit_trace(&sim.y, y_out.as_deref())?,
            };
            finish(&config, &warnings, &out)
        }
        Command::Identify { q, trace, input, estimate_out } => {
            config.command = "identify";
            config.q = Some(*q);
            let (model, _) = checked_model(g, &s, &mut warnings)?;
            let t = read_trace(trace)?;
            let gen = design_residual_generator(&model, None, &s)?;
            let raw = match input {
                TraceKind::Raw => true,
                TraceKind::Residual => false,
                TraceKind::Auto if t.channels() == model.p() => true,
                TraceKind::Auto if t.channels() == gen.residual_channels() => false,
                TraceKind::Auto => {
                    return Err(CliError::Input(format!(
                        "trace has {} channels; expected {} (raw output) or {} (residual)",
                        t.channels(),
                        model.p(),
                        gen.residual_channels()
                    )))
                }
            };
            let r = if raw { apply_filter(&gen, &t)?.r } else { t };
            let res = identify(&gen, &r, *q, &s)?;
            let (from, to) = scoring_window(&gen, r.len());
            let out = IdentifyOut {
                input: if raw { "raw" } else { "residual" },
                accepted: res.accepted,
                support: res.support.clone(),
                consistency_residual: res.consistency_residual,
                subsets_tried: res.subsets_tried,
                passing: res.passing.iter().map(|p| PassingOut { support: p.support.clone(), residual: p.residual }).collect(),
                ambiguous: res.ambiguous,
                ill_conditioned: res.ill_conditioned,
                transient_energy: res.transient_energy,
                scoring_window: [from, to],
                estimate: emit_trace(&res.estimate, estimate_out.as_deref())?,
            };
            finish(&config, &warnings, &out)
        }
    }
}

trait Render {
    fn text(&self) -> String;
}

fn envelope_json<R: Serialize>(config: &Config, warnings: &[String], result: &R) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope { config, warnings, result }).expect("report serializes");
    s.push('\n');
    s
}

fn render_text<R: Render>(config: &Config, warnings: &[String], result: &R) -> String {
    let mut t = format!("dynsec {} (seed {})\n", config.command, config.seed);
    for w in warnings {
        let _ = writeln!(t, "warning: {w}");
    }
    t.push_str(&result.text());
    t
}

fn finish<R: Serialize + Render>(config: &Config, warnings: &[String], result: &R) -> CliResult<Output> {
    Ok(Output { json: envelope_json(config, warnings, result), text: render_text(config, warnings, result) })
}

/// Writes the trace to `path` if given; otherwise returns it for embedding.
fn emit_trace(t: &Trace<f64>, path: Option<&Path>) -> CliResult<TraceOut> {
    match path {
        Some(p) => {
            write_file(p, &trace_csv(t))?;
            Ok(TraceOut::File { path: PathBuf::from(p).display().to_string(), channels: t.channels(), samples: t.len() })
        }
        None => Ok(TraceOut::Inline { channels: t.channels(), samples: t.samples() }),
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum TraceOut {
    File { path: String, channels: usize, samples: usize },
    Inline { channels: usize, samples: Vec<Vec<f64>> },
}

impl TraceOut {
    fn describe(&self) -> String {
        match self {
            TraceOut::File { path, channels, samples } => format!("{samples} samples x {channels} channels written to {path}"),
            TraceOut::Inline { channels, samples } => format!("{} samples x {channels} channels (inline in JSON output)", samples.len()),
        }
    }
}

#[derive(Serialize)]
struct CheckOut {
    name: &'static str,
    passed: bool,
    measured_rank: usize,
    required_rank: usize,
}

#[derive(Serialize)]
struct ValidateOut {
    dims: Dims,
    passed: bool,
    checks: Vec<CheckOut>,
    spectral_radius: f64,
    is_schur: bool,
    eigenvalues: Vec<Cplx>,
}

#[derive(Serialize)]
struct Dims {
    n: usize,
    o: usize,
    m: usize,
    p: usize,
}

impl Dims {
    fn of(model: &Realization) -> Self {
        Dims { n: model.n(), o: model.o(), m: model.m(), p: model.p() }
    }
}

impl ValidateOut {
    fn new(model: &Realization, r: &ValidationReport<f64>) -> Self {
        ValidateOut {
            dims: Dims::of(model),
            passed: r.passed,
            checks: r
                .checks
                .iter()
                .map(|c| CheckOut { name: c.name, passed: c.passed, measured_rank: c.measured_rank, required_rank: c.required_rank })
                .collect(),
            spectral_radius: r.spectral_radius,
            is_schur: r.is_schur,
            eigenvalues: r.eigenvalues.iter().map(|&z| z.into()).collect(),
        }
    }
}

impl Render for ValidateOut {
    fn text(&self) -> String {
        let d = &self.dims;
        let mut t = format!("n = {}, o = {}, m = {}, p = {}\n", d.n, d.o, d.m, d.p);
        for c in &self.checks {
            let mark = if c.passed { "ok" } else { "VIOLATED" };
            let _ = writeln!(t, "  {:<20} {mark} (rank {} of {})", c.name, c.measured_rank, c.required_rank);
        }
        let _ = writeln!(t, "spectral radius {:.6}, Schur: {}", self.spectral_radius, self.is_schur);
        t
    }
}

#[derive(Serialize)]
struct ZeroOut {
    re: f64,
    im: f64,
    persistent: bool,
    rank_at_z: usize,
}

#[derive(Serialize)]
struct ZerosOut {
    support: Vec<usize>,
    normalrank: usize,
    generically_rank_deficient: bool,
    zeros: Vec<ZeroOut>,
}

impl Render for ZerosOut {
    fn text(&self) -> String {
        let mut t = format!("support {:?}, normal rank {}\n", self.support, self.normalrank);
        if self.generically_rank_deficient {
            t.push_str("pencil lacks full column normal rank: every z admits a null vector\n");
        }
        for z in &self.zeros {
            let c = Cplx { re: z.re, im: z.im };
            let kind = if z.persistent { "persistent" } else { "decaying" };
            let _ = writeln!(t, "  z = {c}  rank {}  {kind}", z.rank_at_z);
        }
        if self.zeros.is_empty() && !self.generically_rank_deficient {
            t.push_str("  no finite zeros\n");
        }
        t
    }
}

/// `alpha` as a number, `"inf"`, or `{"lower_bound": k}`.
#[derive(Serialize, Clone, Copy)]
#[serde(untagged)]
enum AlphaOut {
    Finite(usize),
    Infinite(&'static str),
    LowerBound { lower_bound: usize },
}

impl From<Alpha> for AlphaOut {
    fn from(a: Alpha) -> Self {
        match a {
            Alpha::Finite(k) => AlphaOut::Finite(k),
            Alpha::Infinite => AlphaOut::Infinite("inf"),
            Alpha::LowerBound(k) => AlphaOut::LowerBound { lower_bound: k },
        }
    }
}

#[derive(Serialize)]
struct IndexRecord {
    channel: usize,
    label: String,
    alpha: AlphaOut,
    #[serde(skip)]
    alpha_text: String,
    support: Vec<usize>,
    z0: Option<Cplx>,
    method: &'static str,
    subsets_examined: usize,
    normalrank_equality: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

impl IndexRecord {
    fn new(model: &Realization, r: &SecurityIndexResult<f64>, timings: bool) -> Self {
        IndexRecord {
            channel: r.channel,
            label: model.channel_label(r.channel),
            alpha: r.alpha.into(),
            alpha_text: r.alpha.to_string(),
            support: r.witness.as_ref().map(|w| w.support.clone()).unwrap_or_default(),
            z0: r.witness.as_ref().map(|w| w.z0.into()),
            method: match r.method {
                Method::Exact => "exact",
                Method::GreedyUpperBound => "greedy_upper_bound",
            },
            subsets_examined: r.subsets_examined,
            normalrank_equality: r.normalrank_equality,
            elapsed_ms: timings.then_some(r.elapsed.as_secs_f64() * 1e3),
        }
    }
}

#[derive(Serialize)]
struct IndexOut {
    channels: Vec<IndexRecord>,
}

impl Render for IndexOut {
    fn text(&self) -> String {
        let mut t = String::from("channel  label      alpha  support      z0\n");
        for r in &self.channels {
            let z0 = r.z0.map(|z| z.to_string()).unwrap_or_else(|| "-".into());
            let _ = write!(t, "{:<8} {:<10} {:<6} {:<12} {z0}", r.channel, r.label, r.alpha_text, format!("{:?}", r.support));
            if r.normalrank_equality {
                t.push_str("  (normalrank P_d = normalrank P_i)");
            }
            if let Some(ms) = r.elapsed_ms {
                let _ = write!(t, "  {ms:.1} ms");
            }
            t.push('\n');
        }
        t
    }
}

fn decision(d: Decision) -> &'static str {
    match d {
        Decision::Yes => "yes",
        Decision::No => "no",
        Decision::Unknown => "unknown",
    }
}

#[derive(Serialize)]
struct ChannelOut {
    channel: usize,
    label: String,
    alpha: AlphaOut,
    #[serde(skip)]
    alpha_text: String,
    undetectable_attack_exists: &'static str,
    all_attacks_i_identifiable: &'static str,
    asymptotic_variant: bool,
}

#[derive(Serialize)]
struct ClassifyOut {
    q: usize,
    semantics: &'static str,
    all_attacks_identifiable: &'static str,
    channels: Vec<ChannelOut>,
}

impl ClassifyOut {
    fn new(model: &Realization, c: &SystemClassification) -> Self {
        ClassifyOut {
            q: c.q,
            semantics: match c.semantics {
                Semantics::Exact => "exact",
                Semantics::Asymptotic => "asymptotic",
            },
            all_attacks_identifiable: decision(c.all_attacks_identifiable),
            channels: c
                .channels
                .iter()
                .map(|ch| ChannelOut {
                    channel: ch.channel,
                    label: model.channel_label(ch.channel),
                    alpha: ch.alpha.into(),
                    alpha_text: ch.alpha.to_string(),
                    undetectable_attack_exists: decision(ch.undetectable_attack_exists),
                    all_attacks_i_identifiable: decision(ch.all_attacks_i_identifiable),
                    asymptotic_variant: ch.asymptotic_variant,
                })
                .collect(),
        }
    }
}

impl Render for ClassifyOut {
    fn text(&self) -> String {
        let mut t = format!("attacker budget q = {} ({} semantics)\n", self.q, self.semantics);
        t.push_str("channel  label      alpha  undetectable attack  identifiable\n");
        for c in &self.channels {
            let _ = writeln!(
                t,
                "{:<8} {:<10} {:<6} {:<20} {}",
                c.channel, c.label, c.alpha_text, c.undetectable_attack_exists, c.all_attacks_i_identifiable
            );
        }
        let _ = writeln!(t, "all attacks identifiable: {}", self.all_attacks_identifiable);
        t
    }
}

#[derive(Serialize)]
struct SynthOut {
    channel: usize,
    alpha: AlphaOut,
    support: Vec<usize>,
    z0: Cplx,
    horizon: usize,
    x0: Vec<f64>,
    undetectable: bool,
    max_output: f64,
    scale: f64,
    attack: TraceOut,
    disturbance: TraceOut,
}

impl Render for SynthOut {
    fn text(&self) -> String {
        format!(
            "channel {}: attack on {:?} at z0 = {}, x0 = {:?}\nundetectable over {} samples: {} (max |y| = {:.3e}, scale {:.3e})\nattack: {}\ndisturbance: {}\n",
            self.channel,
            self.support,
            self.z0,
            self.x0,
            self.horizon,
            self.undetectable,
            self.max_output,
            self.scale,
            self.attack.describe(),
            self.disturbance.describe()
        )
    }
}

#[derive(Serialize)]
struct FilterOut {
    delta: usize,
    m_prime: usize,
    m_double_prime: usize,
    residual_channels: usize,
    /// Coefficients `N_0 .. N_delta`, row-major.
    n_coeffs: Vec<Vec<Vec<f64>>>,
    completion: Vec<Vec<f64>>,
    l_imp: usize,
    /// Markov parameters `Delta_0 .. Delta_{L_imp - 1}`, row-major.
    markov: Vec<Vec<Vec<f64>>>,
}

impl FilterOut {
    fn new(gen: &ResidualGenerator<f64>) -> Self {
        FilterOut {
            delta: gen.delay,
            m_prime: gen.m_prime,
            m_double_prime: gen.m_dprime,
            residual_channels: gen.residual_channels(),
            n_coeffs: gen.annihilator.coeffs().iter().map(rows).collect(),
            completion: rows(&gen.completion.coeff(0)),
            l_imp: gen.delta_impulse.len(),
            markov: gen.delta_impulse.iter().map(rows).collect(),
        }
    }
}

impl Render for FilterOut {
    fn text(&self) -> String {
        let mut t = format!(
            "delta = {}, m' = {}, m'' = {}, residual channels = {}\n",
            self.delta, self.m_prime, self.m_double_prime, self.residual_channels
        );
        for (j, c) in self.n_coeffs.iter().enumerate() {
            let _ = writeln!(t, "N_{j} = {c:?}");
        }
        let _ = writeln!(t, "{} Markov parameters of Delta (see JSON output)", self.l_imp);
        t
    }
}

#[derive(Serialize)]
struct ApplyOut {
    samples: usize,
    residual_channels: usize,
    warmup: usize,
    residual: TraceOut,
}

impl Render for ApplyOut {
    fn text(&self) -> String {
        format!("residual: {} (first {} samples are warm-up)\n", self.residual.describe(), self.warmup)
    }
}

#[derive(Serialize)]
struct SimulateOut {
    horizon: usize,
    x_final: Vec<f64>,
    max_output: f64,
    y: TraceOut,
}

impl Render for SimulateOut {
    fn text(&self) -> String {
        format!("{} samples, max |y| = {:.6e}, x(N) = {:?}\noutput: {}\n", self.horizon, self.max_output, self.x_final, self.y.describe())
    }
}

#[derive(Serialize)]
struct PassingOut {
    support: Vec<usize>,
    residual: f64,
}

#[derive(Serialize)]
struct IdentifyOut {
    input: &'static str,
    accepted: bool,
    support: Vec<usize>,
    consistency_residual: f64,
    subsets_tried: usize,
    passing: Vec<PassingOut>,
    ambiguous: bool,
    ill_conditioned: bool,
    transient_energy: f64,
    scoring_window: [usize; 2],
    estimate: TraceOut,
}

impl Render for IdentifyOut {
    fn text(&self) -> String {
        let mut t = if self.accepted {
            format!("accepted support {:?} (consistency residual {:.3e})\n", self.support, self.consistency_residual)
        } else if self.ambiguous {
            let s: Vec<_> = self.passing.iter().map(|p| p.support.clone()).collect();
            format!("ambiguous: supports {s:?} all explain the residual\n")
        } else {
            String::from("no support of the allowed size explains the residual\n")
        };
        let _ = writeln!(t, "{} supports tried, transient energy {:.3e}", self.subsets_tried, self.transient_energy);
        if self.ill_conditioned {
            t.push_str("warning: ill-conditioned inversion\n");
        }
        let _ = writeln!(t, "estimate: {}", self.estimate.describe());
        t
    }
}
