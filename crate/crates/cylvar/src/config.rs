//! TOML run configurations: parsing that collects every problem at once
//! (unknown keys, missing blocks, out-of-range values, each with a dotted
//! path), defaults, serialization for byte-stable config echoes, and
//! builders for the library objects a run needs.

use serde::Serialize;
use toml::value::{Table, Value};

use crate::domain::{Omega2, SourceTerm};
use crate::error::{ConfigIssue, Error, Result};
use crate::integrand::IntegrandSpec;
use crate::solver::{Method, SolverOptions};

/// What a run does; the CLI subcommand must agree with the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Solve,
    Sweep,
    Audit,
    Onedim,
}

impl CommandKind {
    pub fn word(self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Sweep => "sweep",
            CommandKind::Audit => "audit",
            CommandKind::Onedim => "onedim",
        }
    }

    fn from_word(w: &str) -> Option<Self> {
        match w {
            "solve" => Some(CommandKind::Solve),
            "sweep" => Some(CommandKind::Sweep),
            "audit" => Some(CommandKind::Audit),
            "onedim" => Some(CommandKind::Onedim),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrandConfig {
    pub kind: String,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing_mu: Option<f64>,
    /// Declared moduli; when present they override the built-in constants
    /// and the audit gate must confirm them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossConfig {
    pub kind: String,
    pub a: f64,
    pub b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainConfig {
    pub h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ells: Option<Vec<f64>>,
    pub cross: CrossConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceConfig {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub method: String,
    pub max_iters: usize,
    pub energy_window: usize,
    pub energy_tol: f64,
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub smoothing_schedule: Vec<f64>,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            method: "auto".into(),
            max_iters: o.max_iters,
            energy_window: o.energy_window,
            energy_tol: o.energy_tol,
            grad_tol: o.grad_tol,
            armijo_c: o.armijo_c,
            backtrack: o.backtrack,
            max_backtracks: o.max_backtracks,
            smoothing_schedule: o.smoothing_schedule,
            record_trace: o.record_trace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneDimConfig {
    pub gamma: f64,
    pub h: f64,
    pub ells: Vec<f64>,
    pub bv_left: f64,
    pub bv_right: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coercive_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditConfig {
    pub count: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            count: 10_000,
            seed: 0,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            formats: vec!["csv".into(), "report".into()],
        }
    }
}

/// A fully validated run configuration with defaults filled in. Serializing
/// it and reparsing yields an equal value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub integrand: IntegrandConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
    pub solver: SolverConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub onedim: Option<OneDimConfig>,
    pub audit: AuditConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    /// The integrand with any declared moduli applied over the built-in
    /// constants.
    pub fn integrand_spec(&self) -> Result<IntegrandSpec> {
        let ic = &self.integrand;
        let mut spec = match ic.kind.as_str() {
            "power" => IntegrandSpec::power(ic.dim, ic.q.unwrap_or(2.0))?,
            "quadratic_form" => {
                IntegrandSpec::quadratic_form(ic.dim, ic.matrix.clone().unwrap_or_default())?
            }
            "aniso_max" => {
                IntegrandSpec::aniso_max(ic.dim, ic.q.unwrap_or(2.0), ic.weight.unwrap_or(0.0))?
            }
            other => {
                return Err(Error::InvalidSpec(format!(
                    "unknown integrand kind {other}"
                )))
            }
        };
        if let Some(mu) = ic.smoothing_mu {
            spec = spec.with_smoothing(mu)?;
        }
        if let Some(v) = ic.lambda_lo {
            spec.lambda_lo = v;
        }
        if let Some(v) = ic.lambda_hi {
            spec.lambda_hi = v;
        }
        if let Some(v) = ic.alpha {
            spec.alpha = v;
        }
        if let Some(v) = ic.beta {
            spec.beta = Some(v);
        }
        Ok(spec)
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            max_iters: s.max_iters,
            energy_window: s.energy_window,
            energy_tol: s.energy_tol,
            grad_tol: s.grad_tol,
            armijo_c: s.armijo_c,
            backtrack: s.backtrack,
            max_backtracks: s.max_backtracks,
            smoothing_schedule: s.smoothing_schedule.clone(),
            record_trace: s.record_trace,
        }
    }

    pub fn method(&self) -> Method {
        match self.solver.method.as_str() {
            "direct" => Method::Direct,
            "iterative" => Method::Iterative,
            _ => Method::Auto,
        }
    }

    /// Cross-section; only valid when a domain block is present.
    pub fn cross(&self) -> Result<Omega2> {
        let d = self
            .domain
            .as_ref()
            .ok_or_else(|| Error::InvalidSpec("no domain block".into()))?;
        Ok(match d.cross.kind.as_str() {
            "rect" => Omega2::Rect {
                a: d.cross.a,
                b: d.cross.b,
                c: d.cross.c.unwrap_or(0.0),
                d: d.cross.d.unwrap_or(0.0),
            },
            _ => Omega2::Interval {
                a: d.cross.a,
                b: d.cross.b,
            },
        })
    }

    /// Source term; only valid when a source block is present.
    pub fn source_term(&self) -> Result<SourceTerm> {
        let s = self
            .source
            .as_ref()
            .ok_or_else(|| Error::InvalidSpec("no source block".into()))?;
        Ok(match s.kind.as_str() {
            "poly" => SourceTerm::PolyX2(s.coeffs.clone().unwrap_or_default()),
            "nodal" => SourceTerm::NodalCross(s.values.clone().unwrap_or_default()),
            _ => SourceTerm::Constant(s.value.unwrap_or(0.0)),
        })
    }

    /// Serialize back to TOML (the config echo artifact).
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Issue collector with dotted-path helpers over TOML tables.
struct Cx {
    issues: Vec<ConfigIssue>,
}

impl Cx {
    fn new() -> Self {
        Cx { issues: Vec::new() }
    }

    fn err(&mut self, path: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn finish(self) -> Result<()> {
        if self.issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self.issues))
        }
    }

    fn float_of(&mut self, path: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.err(path, format!("expected a number, got {}", v.type_str()));
                None
            }
        }
    }

    fn get_f64(&mut self, t: &Table, prefix: &str, key: &str) -> Option<f64> {
        let v = t.get(key)?;
        self.float_of(&format!("{prefix}{key}"), v)
    }

    fn req_f64(&mut self, t: &Table, prefix: &str, key: &str) -> Option<f64> {
        if t.contains_key(key) {
            self.get_f64(t, prefix, key)
        } else {
            self.err(&format!("{prefix}{key}"), "required key is missing");
            None
        }
    }

    fn get_usize(&mut self, t: &Table, prefix: &str, key: &str) -> Option<usize> {
        let v = t.get(key)?;
        let path = format!("{prefix}{key}");
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            Value::Integer(i) => {
                self.err(&path, format!("expected a nonnegative integer, got {i}"));
                None
            }
            _ => {
                self.err(&path, format!("expected an integer, got {}", v.type_str()));
                None
            }
        }
    }

    fn get_u64(&mut self, t: &Table, prefix: &str, key: &str) -> Option<u64> {
        let v = t.get(key)?;
        let path = format!("{prefix}{key}");
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(i) => {
                self.err(&path, format!("expected a nonnegative integer, got {i}"));
                None
            }
            _ => {
                self.err(&path, format!("expected an integer, got {}", v.type_str()));
                None
            }
        }
    }

    fn get_bool(&mut self, t: &Table, prefix: &str, key: &str) -> Option<bool> {
        let v = t.get(key)?;
        match v {
            Value::Boolean(b) => Some(*b),
            _ => {
                self.err(
                    &format!("{prefix}{key}"),
                    format!("expected a boolean, got {}", v.type_str()),
                );
                None
            }
        }
    }

    fn get_str(&mut self, t: &Table, prefix: &str, key: &str) -> Option<String> {
        let v = t.get(key)?;
        match v {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.err(
                    &format!("{prefix}{key}"),
                    format!("expected a string, got {}", v.type_str()),
                );
                None
            }
        }
    }

    fn req_str(&mut self, t: &Table, prefix: &str, key: &str) -> Option<String> {
        if t.contains_key(key) {
            self.get_str(t, prefix, key)
        } else {
            self.err(&format!("{prefix}{key}"), "required key is missing");
            None
        }
    }

    fn get_f64_array(&mut self, t: &Table, prefix: &str, key: &str) -> Option<Vec<f64>> {
        let v = t.get(key)?;
        let path = format!("{prefix}{key}");
        let Value::Array(items) = v else {
            self.err(&path, format!("expected an array, got {}", v.type_str()));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            out.push(self.float_of(&format!("{path}[{i}]"), item)?);
        }
        Some(out)
    }

    fn get_str_array(&mut self, t: &Table, prefix: &str, key: &str) -> Option<Vec<String>> {
        let v = t.get(key)?;
        let path = format!("{prefix}{key}");
        let Value::Array(items) = v else {
            self.err(&path, format!("expected an array, got {}", v.type_str()));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            match item {
                Value::String(s) => out.push(s.clone()),
                _ => {
                    self.err(
                        &format!("{path}[{i}]"),
                        format!("expected a string, got {}", item.type_str()),
                    );
                    return None;
                }
            }
        }
        Some(out)
    }

    fn get_table<'a>(&mut self, t: &'a Table, key: &str) -> Option<&'a Table> {
        let v = t.get(key)?;
        match v {
            Value::Table(inner) => Some(inner),
            _ => {
                self.err(key, format!("expected a table, got {}", v.type_str()));
                None
            }
        }
    }

    /// Flag keys not in the allowlist.
    fn check_keys(&mut self, t: &Table, prefix: &str, allowed: &[&str]) {
        for key in t.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(&format!("{prefix}{key}"), "unknown key");
            }
        }
    }
}

fn positive(cx: &mut Cx, path: &str, v: f64) -> f64 {
    if !v.is_finite() || v <= 0.0 {
        cx.err(path, format!("must be positive and finite, got {v}"));
    }
    v
}

fn parse_integrand(cx: &mut Cx, t: &Table) -> IntegrandConfig {
    cx.check_keys(
        t,
        "integrand.",
        &[
            "kind",
            "dim",
            "q",
            "matrix",
            "weight",
            "smoothing_mu",
            "lambda_lo",
            "lambda_hi",
            "alpha",
            "beta",
        ],
    );
    let p = "integrand.";
    let kind = cx.req_str(t, p, "kind").unwrap_or_default();
    if !kind.is_empty()
        && !matches!(kind.as_str(), "power" | "quadratic_form" | "aniso_max")
    {
        cx.err(
            "integrand.kind",
            format!("must be power, quadratic_form, or aniso_max, got {kind}"),
        );
    }
    let dim = if t.contains_key("dim") {
        cx.get_usize(t, p, "dim").unwrap_or(0)
    } else {
        cx.err("integrand.dim", "required key is missing");
        0
    };
    if dim != 0 && !(1..=3).contains(&dim) {
        cx.err("integrand.dim", format!("must be 1, 2, or 3, got {dim}"));
    }
    let q = cx.get_f64(t, p, "q");
    let matrix = cx.get_f64_array(t, p, "matrix");
    let weight = cx.get_f64(t, p, "weight");
    let smoothing_mu = cx.get_f64(t, p, "smoothing_mu");
    let lambda_lo = cx.get_f64(t, p, "lambda_lo");
    let lambda_hi = cx.get_f64(t, p, "lambda_hi");
    let alpha = cx.get_f64(t, p, "alpha");
    let beta = cx.get_f64(t, p, "beta");

    match kind.as_str() {
        "power" | "aniso_max" => match q {
            None => cx.err("integrand.q", "required for this integrand kind"),
            Some(q) if !q.is_finite() || q < 2.0 => {
                cx.err("integrand.q", format!("q must be >= 2, got {q}"));
            }
            _ => {}
        },
        "quadratic_form" => {
            if let Some(q) = q {
                if q != 2.0 {
                    cx.err("integrand.q", format!("q must be >= 2, and the quadratic family is fixed at q = 2, got {q}"));
                }
            }
            match &matrix {
                None => cx.err("integrand.matrix", "required for quadratic_form"),
                Some(m) if dim != 0 && m.len() != dim * dim => cx.err(
                    "integrand.matrix",
                    format!("expected {} entries for dim {dim}, got {}", dim * dim, m.len()),
                ),
                _ => {}
            }
            if weight.is_some() {
                cx.err("integrand.weight", "only valid for aniso_max");
            }
        }
        _ => {}
    }
    if kind == "power" && matrix.is_some() {
        cx.err("integrand.matrix", "only valid for quadratic_form");
    }
    if kind == "power" && weight.is_some() {
        cx.err("integrand.weight", "only valid for aniso_max");
    }
    if kind == "aniso_max" {
        match weight {
            None => cx.err("integrand.weight", "required for aniso_max"),
            Some(w) if !w.is_finite() || w < 0.0 => {
                cx.err("integrand.weight", format!("must be >= 0, got {w}"));
            }
            _ => {}
        }
        if matrix.is_some() {
            cx.err("integrand.matrix", "only valid for quadratic_form");
        }
    }
    if let Some(mu) = smoothing_mu {
        if !mu.is_finite() || !(0.0..=1.0).contains(&mu) {
            cx.err("integrand.smoothing_mu", format!("must lie in [0, 1], got {mu}"));
        }
    }
    for (key, v) in [("lambda_lo", lambda_lo), ("lambda_hi", lambda_hi), ("alpha", alpha)] {
        if let Some(v) = v {
            if !v.is_finite() || v <= 0.0 {
                cx.err(
                    &format!("integrand.{key}"),
                    format!("must be positive and finite, got {v}"),
                );
            }
        }
    }
    if let (Some(lo), Some(hi)) = (lambda_lo, lambda_hi) {
        if lo > hi {
            cx.err(
                "integrand.lambda_hi",
                format!("upper growth constant {hi} is below the lower one {lo}"),
            );
        }
    }
    if let Some(b) = beta {
        if !b.is_finite() || b <= 0.0 {
            cx.err("integrand.beta", format!("must be positive and finite, got {b}"));
        }
        let q_eff = if kind == "quadratic_form" { 2.0 } else { q.unwrap_or(2.0) };
        if q_eff != 2.0 {
            cx.err("integrand.beta", "the upper modulus is defined only for q = 2");
        }
    }
    IntegrandConfig {
        kind,
        dim,
        q,
        matrix,
        weight,
        smoothing_mu,
        lambda_lo,
        lambda_hi,
        alpha,
        beta,
    }
}

fn parse_cross(cx: &mut Cx, t: &Table) -> CrossConfig {
    cx.check_keys(t, "domain.cross.", &["kind", "a", "b", "c", "d"]);
    let p = "domain.cross.";
    let kind = cx.req_str(t, p, "kind").unwrap_or_default();
    if !kind.is_empty() && !matches!(kind.as_str(), "interval" | "rect") {
        cx.err("domain.cross.kind", format!("must be interval or rect, got {kind}"));
    }
    let a = cx.req_f64(t, p, "a").unwrap_or(0.0);
    let b = cx.req_f64(t, p, "b").unwrap_or(0.0);
    let c = cx.get_f64(t, p, "c");
    let d = cx.get_f64(t, p, "d");
    if t.contains_key("a") && t.contains_key("b") && b <= a {
        cx.err("domain.cross.b", format!("must exceed a = {a}, got {b}"));
    }
    match kind.as_str() {
        "rect" => {
            match (c, d) {
                (Some(c), Some(d)) if d <= c => {
                    cx.err("domain.cross.d", format!("must exceed c = {c}, got {d}"));
                }
                (None, _) => cx.err("domain.cross.c", "required for rect"),
                (_, None) => cx.err("domain.cross.d", "required for rect"),
                _ => {}
            }
        }
        "interval" => {
            if c.is_some() || d.is_some() {
                cx.err("domain.cross.c", "only valid for rect cross-sections");
            }
        }
        _ => {}
    }
    CrossConfig { kind, a, b, c, d }
}

fn parse_domain(cx: &mut Cx, t: &Table, command: Option<CommandKind>) -> DomainConfig {
    cx.check_keys(t, "domain.", &["h", "ell", "ells", "cross"]);
    let p = "domain.";
    let h = cx.req_f64(t, p, "h").map(|v| positive(cx, "domain.h", v)).unwrap_or(0.0);
    let ell = cx.get_f64(t, p, "ell");
    let ells = cx.get_f64_array(t, p, "ells");
    if let Some(e) = ell {
        positive(cx, "domain.ell", e);
    }
    if let Some(list) = &ells {
        if list.is_empty() {
            cx.err("domain.ells", "must not be empty");
        }
        for w in list.windows(2) {
            if !(w[1] > w[0]) {
                cx.err("domain.ells", "must be strictly increasing");
                break;
            }
        }
        if list.iter().any(|e| !e.is_finite() || *e <= 2.0) {
            cx.err("domain.ells", "every sweep half-length must exceed 2");
        }
    }
    match command {
        Some(CommandKind::Solve) => {
            if ell.is_none() {
                cx.err("domain.ell", "required for solve");
            }
            if ells.is_some() {
                cx.err("domain.ells", "not used by solve (use ell)");
            }
        }
        Some(CommandKind::Sweep) => {
            if ells.is_none() {
                cx.err("domain.ells", "required for sweep");
            }
            if ell.is_some() {
                cx.err("domain.ell", "not used by sweep (use ells)");
            }
        }
        _ => {}
    }
    let cross = match cx.get_table(t, "cross") {
        Some(ct) => parse_cross(cx, ct),
        None => {
            if !t.contains_key("cross") {
                cx.err("domain.cross", "required block is missing");
            }
            CrossConfig {
                kind: String::new(),
                a: 0.0,
                b: 0.0,
                c: None,
                d: None,
            }
        }
    };
    DomainConfig { h, ell, ells, cross }
}

fn parse_source(cx: &mut Cx, t: &Table) -> SourceConfig {
    cx.check_keys(t, "source.", &["kind", "value", "coeffs", "values"]);
    let p = "source.";
    let kind = cx.req_str(t, p, "kind").unwrap_or_default();
    if !kind.is_empty() && !matches!(kind.as_str(), "constant" | "poly" | "nodal") {
        cx.err("source.kind", format!("must be constant, poly, or nodal, got {kind}"));
    }
    let value = cx.get_f64(t, p, "value");
    let coeffs = cx.get_f64_array(t, p, "coeffs");
    let values = cx.get_f64_array(t, p, "values");
    match kind.as_str() {
        "constant" => {
            if value.is_none() {
                cx.err("source.value", "required for a constant source");
            }
            if coeffs.is_some() || values.is_some() {
                cx.err("source.kind", "constant sources take only value");
            }
        }
        "poly" => {
            match &coeffs {
                None => cx.err("source.coeffs", "required for a poly source"),
                Some(c) if c.is_empty() => cx.err("source.coeffs", "must not be empty"),
                _ => {}
            }
            if value.is_some() || values.is_some() {
                cx.err("source.kind", "poly sources take only coeffs");
            }
        }
        "nodal" => {
            match &values {
                None => cx.err("source.values", "required for a nodal source"),
                Some(v) if v.is_empty() => cx.err("source.values", "must not be empty"),
                _ => {}
            }
            if value.is_some() || coeffs.is_some() {
                cx.err("source.kind", "nodal sources take only values");
            }
        }
        _ => {}
    }
    SourceConfig {
        kind,
        value,
        coeffs,
        values,
    }
}

fn parse_solver(cx: &mut Cx, t: &Table) -> SolverConfig {
    cx.check_keys(
        t,
        "solver.",
        &[
            "method",
            "max_iters",
            "energy_window",
            "energy_tol",
            "grad_tol",
            "armijo_c",
            "backtrack",
            "max_backtracks",
            "smoothing_schedule",
            "record_trace",
        ],
    );
    let p = "solver.";
    let mut cfg = SolverConfig::default();
    if let Some(m) = cx.get_str(t, p, "method") {
        if !matches!(m.as_str(), "auto" | "direct" | "iterative") {
            cx.err("solver.method", format!("must be auto, direct, or iterative, got {m}"));
        }
        cfg.method = m;
    }
    if let Some(v) = cx.get_usize(t, p, "max_iters") {
        cfg.max_iters = v;
    }
    if let Some(v) = cx.get_usize(t, p, "energy_window") {
        cfg.energy_window = v;
    }
    if let Some(v) = cx.get_f64(t, p, "energy_tol") {
        cfg.energy_tol = v;
    }
    if let Some(v) = cx.get_f64(t, p, "grad_tol") {
        cfg.grad_tol = v;
    }
    if let Some(v) = cx.get_f64(t, p, "armijo_c") {
        cfg.armijo_c = v;
    }
    if let Some(v) = cx.get_f64(t, p, "backtrack") {
        cfg.backtrack = v;
    }
    if let Some(v) = cx.get_usize(t, p, "max_backtracks") {
        cfg.max_backtracks = v;
    }
    if let Some(v) = cx.get_f64_array(t, p, "smoothing_schedule") {
        cfg.smoothing_schedule = v;
    }
    if let Some(v) = cx.get_bool(t, p, "record_trace") {
        cfg.record_trace = v;
    }
    // One structural pass through the solver's own validator so option
    // combinations stay in sync with it.
    let opts = SolverOptions {
        max_iters: cfg.max_iters,
        energy_window: cfg.energy_window,
        energy_tol: cfg.energy_tol,
        grad_tol: cfg.grad_tol,
        armijo_c: cfg.armijo_c,
        backtrack: cfg.backtrack,
        max_backtracks: cfg.max_backtracks,
        smoothing_schedule: cfg.smoothing_schedule.clone(),
        record_trace: cfg.record_trace,
    };
    if let Err(Error::InvalidSpec(msg)) = opts.validate() {
        cx.err("solver", msg);
    }
    cfg
}

fn parse_onedim(cx: &mut Cx, t: &Table) -> OneDimConfig {
    cx.check_keys(
        t,
        "onedim.",
        &["gamma", "h", "ells", "bv_left", "bv_right", "coercive_q"],
    );
    let p = "onedim.";
    let gamma = cx
        .req_f64(t, p, "gamma")
        .map(|v| positive(cx, "onedim.gamma", v))
        .unwrap_or(0.0);
    let h = cx
        .req_f64(t, p, "h")
        .map(|v| positive(cx, "onedim.h", v))
        .unwrap_or(0.0);
    let ells = match cx.get_f64_array(t, p, "ells") {
        Some(list) => {
            if list.is_empty() {
                cx.err("onedim.ells", "must not be empty");
            }
            for w in list.windows(2) {
                if !(w[1] > w[0]) {
                    cx.err("onedim.ells", "must be strictly increasing");
                    break;
                }
            }
            if list.iter().any(|e| !e.is_finite() || *e <= 0.0) {
                cx.err("onedim.ells", "half-lengths must be positive");
            }
            list
        }
        None => {
            if !t.contains_key("ells") {
                cx.err("onedim.ells", "required key is missing");
            }
            Vec::new()
        }
    };
    let bv_left = cx.req_f64(t, p, "bv_left").unwrap_or(0.0);
    let bv_right = cx.req_f64(t, p, "bv_right").unwrap_or(0.0);
    for (key, v) in [("bv_left", bv_left), ("bv_right", bv_right)] {
        if !v.is_finite() || v < 0.0 {
            cx.err(&format!("onedim.{key}"), format!("must be >= 0, got {v}"));
        }
    }
    let coercive_q = cx.get_f64(t, p, "coercive_q");
    if let Some(q) = coercive_q {
        if !q.is_finite() || q < 2.0 {
            cx.err("onedim.coercive_q", format!("q must be >= 2, got {q}"));
        }
    }
    OneDimConfig {
        gamma,
        h,
        ells,
        bv_left,
        bv_right,
        coercive_q,
    }
}

fn parse_audit(cx: &mut Cx, t: &Table) -> AuditConfig {
    cx.check_keys(t, "audit.", &["count", "seed", "tol"]);
    let p = "audit.";
    let mut cfg = AuditConfig::default();
    if let Some(v) = cx.get_usize(t, p, "count") {
        if v == 0 {
            cx.err("audit.count", "must be positive");
        }
        cfg.count = v;
    }
    if let Some(v) = cx.get_u64(t, p, "seed") {
        cfg.seed = v;
    }
    if let Some(v) = cx.get_f64(t, p, "tol") {
        if !v.is_finite() || v <= 0.0 {
            cx.err("audit.tol", format!("must be positive and finite, got {v}"));
        }
        cfg.tol = v;
    }
    cfg
}

fn parse_output(cx: &mut Cx, t: &Table) -> OutputConfig {
    cx.check_keys(t, "output.", &["dir", "formats"]);
    let p = "output.";
    let mut cfg = OutputConfig::default();
    if let Some(v) = cx.get_str(t, p, "dir") {
        if v.is_empty() {
            cx.err("output.dir", "must not be empty");
        }
        cfg.dir = v;
    }
    if let Some(v) = cx.get_str_array(t, p, "formats") {
        for f in &v {
            if !matches!(f.as_str(), "csv" | "report" | "dump") {
                cx.err("output.formats", format!("must be csv, report, or dump, got {f}"));
            }
        }
        cfg.formats = v;
    }
    cfg
}

/// Parse and fully validate a TOML run configuration, collecting every
/// problem rather than stopping at the first.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Value = toml::from_str(text).map_err(|e| {
        Error::Config(vec![ConfigIssue {
            path: "(syntax)".into(),
            message: e.message().to_string(),
        }])
    })?;
    let Value::Table(top) = root else {
        return Err(Error::Config(vec![ConfigIssue {
            path: "(root)".into(),
            message: "configuration must be a table".into(),
        }]));
    };

    let mut cx = Cx::new();
    cx.check_keys(
        &top,
        "",
        &[
            "command", "integrand", "domain", "source", "solver", "onedim", "audit", "output",
        ],
    );

    let command = match cx.req_str(&top, "", "command") {
        Some(w) => match CommandKind::from_word(&w) {
            Some(c) => Some(c),
            None => {
                cx.err(
                    "command",
                    format!("must be solve, sweep, audit, or onedim, got {w}"),
                );
                None
            }
        },
        None => None,
    };

    let integrand = match cx.get_table(&top, "integrand") {
        Some(t) => Some(parse_integrand(&mut cx, t)),
        None => {
            if !top.contains_key("integrand") {
                cx.err("integrand", "required block is missing");
            }
            None
        }
    };
    let domain = cx
        .get_table(&top, "domain")
        .map(|t| parse_domain(&mut cx, t, command));
    let source = cx.get_table(&top, "source").map(|t| parse_source(&mut cx, t));
    let solver = cx
        .get_table(&top, "solver")
        .map(|t| parse_solver(&mut cx, t))
        .unwrap_or_default();
    let onedim = cx.get_table(&top, "onedim").map(|t| parse_onedim(&mut cx, t));
    let audit = cx
        .get_table(&top, "audit")
        .map(|t| parse_audit(&mut cx, t))
        .unwrap_or_default();
    let output = cx
        .get_table(&top, "output")
        .map(|t| parse_output(&mut cx, t))
        .unwrap_or_default();

    // Per-command block requirements and dimensional consistency.
    match command {
        Some(CommandKind::Solve) | Some(CommandKind::Sweep) => {
            if domain.is_none() && top.contains_key("domain") {
                // Type error already recorded.
            } else if domain.is_none() {
                cx.err("domain", "required block is missing");
            }
            if source.is_none() && !top.contains_key("source") {
                cx.err("source", "required block is missing");
            }
            if let (Some(ic), Some(dc)) = (&integrand, &domain) {
                let cross_dim = match dc.cross.kind.as_str() {
                    "interval" => Some(1),
                    "rect" => Some(2),
                    _ => None,
                };
                if let Some(cd) = cross_dim {
                    if ic.dim != 0 && ic.dim != cd + 1 {
                        cx.err(
                            "integrand.dim",
                            format!(
                                "must be 1 + the cross-section dimension ({}) for cylinder runs, got {}",
                                cd + 1,
                                ic.dim
                            ),
                        );
                    }
                }
            }
        }
        Some(CommandKind::Onedim) => {
            if onedim.is_none() && !top.contains_key("onedim") {
                cx.err("onedim", "required block is missing");
            }
            if let Some(ic) = &integrand {
                if ic.dim != 0 && ic.dim != 1 {
                    cx.err("integrand.dim", "must be 1 for one-dimensional runs");
                }
            }
        }
        Some(CommandKind::Audit) | None => {}
    }

    // Constructor-level validation (SPD matrices and the like) surfaces here
    // so one parse call reports everything it can.
    if let Some(ic) = &integrand {
        let probe = RunConfig {
            command: command.unwrap_or(CommandKind::Audit),
            integrand: ic.clone(),
            domain: None,
            source: None,
            solver: SolverConfig::default(),
            onedim: None,
            audit: AuditConfig::default(),
            output: OutputConfig::default(),
        };
        if cx.issues.is_empty() {
            if let Err(e) = probe.integrand_spec() {
                cx.err("integrand", e.to_string());
            }
        }
    }

    cx.finish()?;
    Ok(RunConfig {
        command: command.expect("validated"),
        integrand: integrand.expect("validated"),
        domain,
        source,
        solver,
        onedim,
        audit,
        output,
    })
}
