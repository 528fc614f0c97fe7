//! Line-oriented `key = value` run configuration.
//!
//! Keys before the first `[section]` header apply to every subcommand; keys
//! under `[name]` apply only when subcommand `name` runs and override the
//! global ones. `#` starts a comment. Every line is checked, and all problems
//! are reported together with their line numbers.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use pinlab_core::JumpKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Green,
    Annealed,
    Quenched,
    Lowtemp,
    Smoothing,
    Sandwich,
    RenewalMc,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Green,
        Command::Annealed,
        Command::Quenched,
        Command::Lowtemp,
        Command::Smoothing,
        Command::Sandwich,
        Command::RenewalMc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Green => "green",
            Command::Annealed => "annealed",
            Command::Quenched => "quenched",
            Command::Lowtemp => "lowtemp",
            Command::Smoothing => "smoothing",
            Command::Sandwich => "sandwich",
            Command::RenewalMc => "renewal-mc",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `simple`, or explicit `(displacement, probability)` entries.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Simple,
    Entries(Vec<(Vec<i64>, f64)>),
}

impl KernelSpec {
    pub fn build(&self, dim: usize) -> pinlab_core::Result<JumpKernel> {
        match self {
            KernelSpec::Simple => JumpKernel::simple(dim),
            KernelSpec::Entries(e) => JumpKernel::new(dim, e.clone()),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Simple => f.write_str("simple"),
            KernelSpec::Entries(entries) => {
                let parts: Vec<String> = entries
                    .iter()
                    .map(|(x, p)| {
                        let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
                        format!("{}:{p}", coords.join(" "))
                    })
                    .collect();
                f.write_str(&parts.join("; "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub dim: usize,
    pub kernel: KernelSpec,
    pub rho: f64,
    pub beta: Vec<f64>,
    pub t: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    /// Solver truncation tolerance.
    pub tolerance: f64,
    pub series_tol: f64,
    pub max_radius: Option<usize>,
    /// Horizons for the smoothing contact diagnostic.
    pub contact_t: Vec<f64>,
    /// `(β - β_c)` window for the annealed onset fit.
    pub window: (f64, f64),
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            dim: 1,
            kernel: KernelSpec::Simple,
            rho: 1.0,
            beta: vec![1.0],
            t: vec![10.0],
            n: 20,
            seed: 0,
            tolerance: 1e-6,
            series_tol: 1e-12,
            max_radius: None,
            contact_t: Vec::new(),
            window: (1e-3, 1e-2),
            threads: None,
            out: None,
        }
    }
}

/// One problem in a configuration; `line` is 0 for problems that are not
/// tied to a single line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.key, self.message)
        } else {
            write!(f, "line {}: {}: {}", self.line, self.key, self.message)
        }
    }
}

const KEYS: [&str; 15] = [
    "command",
    "d",
    "kernel",
    "rho",
    "beta",
    "t",
    "n",
    "seed",
    "tolerance",
    "series_tol",
    "max_radius",
    "contact_t",
    "window",
    "threads",
    "out",
];

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

/// Global entries plus one list per section, in file order.
#[derive(Debug, Clone, Default)]
struct Layout {
    global: Vec<Entry>,
    sections: Vec<(Command, Vec<Entry>)>,
}

fn split_lines(text: &str, errors: &mut Vec<ConfigError>) -> Layout {
    let mut layout = Layout::default();
    let mut current: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                errors.push(err(line, "section", format!("malformed header `{body}`")));
                continue;
            };
            match name.trim().parse::<Command>() {
                Ok(c) => {
                    if layout.sections.iter().any(|(s, _)| *s == c) {
                        errors.push(err(line, "section", format!("duplicate section [{c}]")));
                    }
                    layout.sections.push((c, Vec::new()));
                    current = Some(layout.sections.len() - 1);
                }
                Err(e) => errors.push(err(line, "section", e)),
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            errors.push(err(line, body, "expected `key = value`".into()));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            errors.push(err(line, key, "unknown key".into()));
            continue;
        }
        let scope = match current {
            Some(s) => &mut layout.sections[s].1,
            None => &mut layout.global,
        };
        if current.is_some() && key == "command" {
            errors.push(err(
                line,
                key,
                "`command` is only allowed before the first section".into(),
            ));
            continue;
        }
        if let Some(prev) = scope.iter().find(|e| e.key == key) {
            errors.push(err(line, key, format!("already set on line {}", prev.line)));
            continue;
        }
        scope.push(Entry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    layout
}

fn err(line: usize, key: &str, message: String) -> ConfigError {
    ConfigError {
        line,
        key: key.to_string(),
        message,
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{v}` is not finite"));
    }
    Ok(x)
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_f64(s.trim())).collect()
}

fn parse_int<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{v}` is not a nonnegative integer"))
}

fn parse_kernel(v: &str) -> Result<KernelSpec, String> {
    if v == "simple" {
        return Ok(KernelSpec::Simple);
    }
    let mut entries = Vec::new();
    for part in v.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (x, p) = part
            .split_once(':')
            .ok_or_else(|| format!("kernel entry `{part}` is not `coords:p`"))?;
        let coords = x
            .split_whitespace()
            .map(|c| c.parse::<i64>().map_err(|_| format!("bad coordinate `{c}`")))
            .collect::<Result<Vec<_>, _>>()?;
        entries.push((coords, parse_f64(p.trim())?));
    }
    if entries.is_empty() {
        return Err("empty kernel".into());
    }
    Ok(KernelSpec::Entries(entries))
}

/// Applies one entry; type errors only, ranges are checked later.
fn apply(cfg: &mut RunConfig, e: &Entry) -> Result<(), String> {
    let v = e.value.as_str();
    match e.key.as_str() {
        "command" => cfg.command = Some(v.parse()?),
        "d" => cfg.dim = parse_int(v)?,
        "kernel" => cfg.kernel = parse_kernel(v)?,
        "rho" => cfg.rho = parse_f64(v)?,
        "beta" => cfg.beta = parse_list(v)?,
        "t" => cfg.t = parse_list(v)?,
        "n" => cfg.n = parse_int(v)?,
        "seed" => cfg.seed = parse_int(v)?,
        "tolerance" => cfg.tolerance = parse_f64(v)?,
        "series_tol" => cfg.series_tol = parse_f64(v)?,
        "max_radius" => cfg.max_radius = Some(parse_int(v)?),
        "contact_t" => cfg.contact_t = parse_list(v)?,
        "window" => {
            let w = parse_list(v)?;
            if w.len() != 2 {
                return Err("window takes exactly two numbers `lo, hi`".into());
            }
            cfg.window = (w[0], w[1]);
        }
        "threads" => cfg.threads = Some(parse_int(v)?),
        "out" => cfg.out = Some(PathBuf::from(v)),
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

/// Parses `text` and resolves it for `command` (or the file's own `command`
/// key when `None`). Returns every problem found.
pub fn parse_config(text: &str, command: Option<Command>) -> Result<RunConfig, Vec<ConfigError>> {
    parse_inner(text, command, true)
}

/// Syntax and type checks only, no range checks.
pub fn parse_unvalidated(text: &str, command: Option<Command>) -> Result<RunConfig, Vec<ConfigError>> {
    parse_inner(text, command, false)
}

fn parse_inner(text: &str, command: Option<Command>, check_ranges: bool) -> Result<RunConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let layout = split_lines(text, &mut errors);
    let mut cfg = RunConfig::default();
    for e in &layout.global {
        if let Err(m) = apply(&mut cfg, e) {
            errors.push(err(e.line, &e.key, m));
        }
    }
    if let Some(c) = command {
        cfg.command = Some(c);
    }
    for (section, entries) in &layout.sections {
        // type-check every section, apply only the selected one
        let mut scratch = cfg.clone();
        let selected = Some(*section) == cfg.command;
        for e in entries {
            let target = if selected { &mut cfg } else { &mut scratch };
            if let Err(m) = apply(target, e) {
                errors.push(err(e.line, &e.key, m));
            }
        }
    }
    // range checks on keys that parsed; a key with a type error keeps its default
    let lines = key_lines(&layout, cfg.command);
    let checks = if check_ranges { validate(&cfg) } else { Vec::new() };
    let range: Vec<ConfigError> = checks
        .into_iter()
        .filter(|(key, _)| !errors.iter().any(|e| e.key == *key))
        .map(|(key, message)| ConfigError {
            line: lines(key),
            key: key.to_string(),
            message,
        })
        .collect();
    errors.extend(range);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        errors.sort_by_key(|e| e.line);
        Err(errors)
    }
}

/// Line that last set `key` for this command, 0 for defaults.
fn key_lines(layout: &Layout, command: Option<Command>) -> impl Fn(&str) -> usize + '_ {
    move |key: &str| {
        let section = layout
            .sections
            .iter()
            .filter(|(c, _)| Some(*c) == command)
            .flat_map(|(_, es)| es.iter());
        section
            .chain(layout.global.iter())
            .find(|e| e.key == key)
            .map_or(0, |e| e.line)
    }
}

fn ascending_positive(v: &[f64]) -> bool {
    v.iter().all(|x| *x > 0.0) && v.windows(2).all(|w| w[1] > w[0])
}

/// Range checks, including those that depend on the subcommand.
pub fn validate(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    let mut bad = |key: &'static str, msg: &str| out.push((key, msg.to_string()));
    let Some(command) = cfg.command else {
        bad("command", "no subcommand given");
        return out;
    };
    if !(1..=8).contains(&cfg.dim) {
        bad("d", "dimension must be between 1 and 8");
    } else if let Err(e) = cfg.kernel.build(cfg.dim) {
        bad("kernel", &e.to_string());
    }
    if !(cfg.rho >= 0.0) {
        bad("rho", "must be >= 0");
    }
    if cfg.beta.is_empty() {
        bad("beta", "need at least one value");
    } else if !cfg.beta.windows(2).all(|w| w[1] > w[0]) {
        bad("beta", "grid must be strictly ascending");
    }
    if cfg.t.is_empty() {
        bad("t", "need at least one value");
    } else if !cfg.t.windows(2).all(|w| w[1] > w[0]) || cfg.t.iter().any(|t| *t < 0.0) {
        bad("t", "grid must be ascending and >= 0");
    }
    if !(cfg.tolerance > 0.0) {
        bad("tolerance", "must be > 0");
    }
    if !(cfg.series_tol > 0.0 && cfg.series_tol < 1.0) {
        bad("series_tol", "must lie in (0, 1)");
    }
    if cfg.max_radius == Some(0) {
        bad("max_radius", "must be >= 1");
    }
    if !(cfg.window.0 > 0.0 && cfg.window.1 > cfg.window.0) {
        bad("window", "need 0 < lo < hi");
    }
    if cfg.threads == Some(0) {
        bad("threads", "must be >= 1");
    }
    if !ascending_positive(&cfg.contact_t) {
        bad("contact_t", "must be ascending and > 0");
    }
    let simple = cfg.kernel == KernelSpec::Simple;
    match command {
        Command::Green if cfg.dim < 3 => bad("d", "Green's function needs d >= 3"),
        Command::Green | Command::Annealed if !simple && cfg.dim > 1 => {
            bad("kernel", "general kernels are supported here only in d = 1")
        }
        Command::Quenched | Command::Lowtemp | Command::Smoothing => {
            if cfg.n < 2 {
                bad("n", "need at least two disorder samples");
            }
            if !ascending_positive(&cfg.t) {
                bad("t", "horizons must be > 0");
            }
            if command != Command::Quenched && cfg.t.len() != 1 {
                bad("t", "this subcommand takes a single horizon");
            }
            if command == Command::Lowtemp && cfg.beta.iter().any(|b| *b <= 0.0) {
                bad("beta", "must be > 0");
            }
            if command == Command::Smoothing {
                if cfg.dim < 3 {
                    bad("d", "smoothing needs d >= 3");
                }
                if !(cfg.rho > 0.0) {
                    bad("rho", "smoothing needs rho > 0");
                }
                if !simple {
                    bad("kernel", "smoothing needs the simple walk");
                }
            }
        }
        Command::Sandwich if cfg.beta.iter().any(|b| *b <= 0.0) => bad("beta", "must be > 0"),
        Command::RenewalMc => {
            if cfg.n < 1 {
                bad("n", "need at least one sample");
            }
            if !simple && cfg.dim > 1 {
                bad("kernel", "general kernels are supported here only in d = 1");
            }
        }
        _ => {}
    }
    out
}

/// Global-scope text that parses back to an equal config.
pub fn serialize(cfg: &RunConfig) -> String {
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    let mut s = String::new();
    if let Some(c) = cfg.command {
        s += &format!("command = {c}\n");
    }
    s += &format!("d = {}\n", cfg.dim);
    s += &format!("kernel = {}\n", cfg.kernel);
    s += &format!("rho = {}\n", cfg.rho);
    s += &format!("beta = {}\n", list(&cfg.beta));
    s += &format!("t = {}\n", list(&cfg.t));
    s += &format!("n = {}\n", cfg.n);
    s += &format!("seed = {}\n", cfg.seed);
    s += &format!("tolerance = {}\n", cfg.tolerance);
    s += &format!("series_tol = {}\n", cfg.series_tol);
    if let Some(r) = cfg.max_radius {
        s += &format!("max_radius = {r}\n");
    }
    s += &format!("contact_t = {}\n", list(&cfg.contact_t));
    s += &format!("window = {}, {}\n", cfg.window.0, cfg.window.1);
    if let Some(n) = cfg.threads {
        s += &format!("threads = {n}\n");
    }
    if let Some(o) = &cfg.out {
        s += &format!("out = {}\n", o.display());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("rho=1.0\nbeta=2.0\nd=3", Some(Command::Quenched)).unwrap();
        assert_eq!(c.dim, 3);
        assert_eq!(c.beta, vec![2.0]);
        assert_eq!(c.n, 20);
        assert_eq!(c.kernel, KernelSpec::Simple);
    }

    #[test]
    fn negative_rho_is_a_range_error() {
        let e = parse_config("rho=-1", Some(Command::Sandwich)).unwrap_err();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].key, "rho");
        assert_eq!(e[0].line, 1);
    }

    #[test]
    fn every_error_is_reported_with_its_line() {
        let text = "d = 1\nbogus = 3\nrho = x\nseries_tol = 2\n[quenched]\nn = -2\n[nope]\n";
        let e = parse_config(text, Some(Command::Quenched)).unwrap_err();
        let lines: Vec<usize> = e.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 4, 6, 7]);
    }

    #[test]
    fn sections_apply_to_their_subcommand_only() {
        let text = "beta = 1\n[lowtemp]\nbeta = 10, 20\n[sandwich]\nbeta = 3\n";
        assert_eq!(
            parse_config(text, Some(Command::Lowtemp)).unwrap().beta,
            vec![10.0, 20.0]
        );
        assert_eq!(parse_config(text, Some(Command::Sandwich)).unwrap().beta, vec![3.0]);
        assert_eq!(parse_config(text, Some(Command::Quenched)).unwrap().beta, vec![1.0]);
    }

    #[test]
    fn unselected_sections_are_still_checked() {
        let e = parse_config("[sandwich]\nrho = oops\n", Some(Command::Quenched)).unwrap_err();
        assert_eq!(e[0].line, 2);
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let e = parse_config("n = 3\nn = 4\n", Some(Command::Quenched)).unwrap_err();
        assert!(e[0].message.contains("line 1"));
    }

    #[test]
    fn subcommand_specific_ranges() {
        assert!(parse_config("d = 2", Some(Command::Green)).is_err());
        assert!(parse_config("d = 3", Some(Command::Green)).is_ok());
        assert!(parse_config("d = 3\nrho = 0", Some(Command::Smoothing)).is_err());
        assert!(parse_config("", None).is_err());
    }

    #[test]
    fn general_kernel_round_trips() {
        let text = "command = annealed\nkernel = 1:0.25; -1:0.25; 2:0.25; -2:0.25\n";
        let c = parse_config(text, None).unwrap();
        assert!(matches!(c.kernel, KernelSpec::Entries(ref e) if e.len() == 4));
        assert_eq!(parse_config(&serialize(&c), None).unwrap(), c);
    }
}
