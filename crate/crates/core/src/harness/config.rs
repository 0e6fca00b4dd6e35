//! Run configuration: flat `key = value` lines.
//!
//! Keys carry a section prefix (`gas.gamma = 4`). A line `[gas]` sets the
//! prefix for the keys that follow it, so both spellings work. Blank lines
//! and `#` comments are skipped.
//!
//! Analytic fields are written as a catalog name followed by `key=value`
//! parameters, vectors as comma lists, and numbers may use a `pi` suffix:
//!
//! ```text
//! data.rho0 = const3 c=1
//! data.u_b  = affine a=0,0,0,0,0,0,0,0,0 b=1,0,0
//! reference.v = trig_product amp=0.5,-0.3,0.2 k=pi,pi,pi nu=1
//! data.u0   = gaussian_bump amp=1,0,0 center=0.5,0.5,0.5 width=0.2
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analytic::{CatalogField, Reference};
use crate::constitutive::{validate_parameters, ConstitutiveError, GasModel, Mode};
use crate::mesh::PlanarRegion;
use crate::scheme::{DtPolicy, SchemeParams, Strategy};
use crate::{Mat3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Parameters(#[from] ConstitutiveError),
}

fn perr(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Parse { line, msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    File(PathBuf),
    ReferenceTet,
    KuhnBox { n: [usize; 3], lengths: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasConfig {
    pub gamma: f64,
    pub a_coeff: f64,
    pub mu: f64,
    pub lambda: f64,
    pub beta: f64,
    pub omega: f64,
    pub regularization: bool,
    pub mode: Mode,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh: MeshSource,
    /// Uniform refinements applied to the loaded mesh.
    pub refine: usize,
    pub shape_bound: f64,
    pub gas: GasConfig,
    pub t_final: f64,
    pub dt_policy: DtPolicy,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iters: usize,
    pub relaxation: f64,
    pub strategy: Strategy,
    pub rho0: CatalogField,
    pub u0: CatalogField,
    pub rho_b: CatalogField,
    pub u_b: CatalogField,
    pub inflow: Vec<PlanarRegion>,
    pub outflow: Vec<PlanarRegion>,
    /// Manufactured sources for `reference`.
    pub mms: bool,
    pub reference: Option<Reference>,
    pub probe_continuity: Option<CatalogField>,
    pub probe_momentum: Option<CatalogField>,
    pub out_dir: PathBuf,
    pub snapshot_every: usize,
    pub levels: usize,
    pub seed: u64,
}

/// Parses a number, allowing `pi`, `2pi`, `-0.5pi`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let t = s.trim();
    if let Some(head) = t.strip_suffix("pi") {
        let c = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|e| format!("`{s}`: {e}"))?,
        };
        return Ok(c * std::f64::consts::PI);
    }
    let x = t.parse::<f64>().map_err(|e| format!("`{s}`: {e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_number).collect()
}

fn vec3(s: &str, scalar_ok: bool) -> Result<Vec3, String> {
    let v = parse_list(s)?;
    match v.len() {
        3 => Ok(Vec3::new(v[0], v[1], v[2])),
        1 if scalar_ok => Ok(Vec3::new(v[0], 0.0, 0.0)),
        n => Err(format!("expected 3 components, found {n}")),
    }
}

/// Parses a catalog field such as `trig_product amp=1,0,0 k=pi,pi,pi`.
pub fn parse_field(s: &str) -> Result<CatalogField, String> {
    let mut toks = s.split_whitespace();
    let name = toks.next().ok_or("empty field")?;
    let mut params = BTreeMap::new();
    for t in toks {
        let (k, v) = t.split_once('=').ok_or_else(|| format!("expected key=value, found `{t}`"))?;
        if params.insert(k, v).is_some() {
            return Err(format!("duplicate parameter `{k}`"));
        }
    }
    let allowed: &[&str] = match name {
        "const3" => &["c"],
        "affine" => &["a", "b"],
        "trig_product" => &["offset", "amp", "k", "phase", "nu"],
        "gaussian_bump" => &["offset", "amp", "center", "width", "nu"],
        other => return Err(format!("unknown catalog field `{other}`")),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(k)) {
        return Err(format!("`{name}` has no parameter `{k}`"));
    }
    let get3 = |k: &str, default: Vec3| -> Result<Vec3, String> {
        params.get(k).map_or(Ok(default), |v| vec3(v, false).map_err(|e| format!("{k}: {e}")))
    };
    let get1 = |k: &str, default: Option<f64>| -> Result<f64, String> {
        match (params.get(k), default) {
            (Some(v), _) => parse_number(v).map_err(|e| format!("{k}: {e}")),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(format!("`{name}` needs `{k}`")),
        }
    };
    let pi = std::f64::consts::PI;
    Ok(match name {
        "const3" => CatalogField::Const3 {
            c: params.get("c").map_or(Ok(Vec3::zeros()), |v| vec3(v, true).map_err(|e| format!("c: {e}")))?,
        },
        "affine" => {
            let a = match params.get("a") {
                Some(v) => {
                    let l = parse_list(v)?;
                    if l.len() != 9 {
                        return Err(format!("a: expected 9 entries, found {}", l.len()));
                    }
                    Mat3::from_row_slice(&l)
                }
                None => Mat3::zeros(),
            };
            CatalogField::Affine { a, b: get3("b", Vec3::zeros())? }
        }
        "trig_product" => CatalogField::TrigProduct {
            offset: get3("offset", Vec3::zeros())?,
            amp: get3("amp", Vec3::zeros())?,
            k: get3("k", Vec3::new(pi, pi, pi))?,
            phase: get3("phase", Vec3::zeros())?,
            nu: get1("nu", Some(0.0))?,
        },
        _ => {
            let width = get1("width", None)?;
            if !(width > 0.0) {
                return Err("width must be positive".into());
            }
            CatalogField::GaussianBump {
                offset: get3("offset", Vec3::zeros())?,
                amp: get3("amp", Vec3::zeros())?,
                center: get3("center", Vec3::zeros())?,
                width,
                nu: get1("nu", Some(0.0))?,
            }
        }
    })
}

/// `axis=0 value=0 lo=0,0 hi=1,1`, several separated by `;`.
fn parse_regions(s: &str) -> Result<Vec<PlanarRegion>, String> {
    let mut out = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let mut axis = None;
        let (mut value, mut lo, mut hi) = (None, None, None);
        for t in part.split_whitespace() {
            let (k, v) = t.split_once('=').ok_or_else(|| format!("expected key=value, found `{t}`"))?;
            match k {
                "axis" => axis = Some(v.parse::<usize>().map_err(|e| format!("axis: {e}"))?),
                "value" => value = Some(parse_number(v)?),
                "lo" | "hi" => {
                    let l = parse_list(v)?;
                    if l.len() != 2 {
                        return Err(format!("{k}: expected 2 entries"));
                    }
                    if k == "lo" {
                        lo = Some([l[0], l[1]]);
                    } else {
                        hi = Some([l[0], l[1]]);
                    }
                }
                other => return Err(format!("unknown region key `{other}`")),
            }
        }
        let axis = axis.ok_or("region needs axis")?;
        if axis > 2 {
            return Err(format!("axis {axis} out of range"));
        }
        out.push(PlanarRegion::axis_rect(
            axis,
            value.ok_or("region needs value")?,
            lo.ok_or("region needs lo")?,
            hi.ok_or("region needs hi")?,
        ));
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected on/off, found `{s}`")),
    }
}

const KEYS: &[&str] = &[
    "mesh.path",
    "mesh.builtin",
    "mesh.refine",
    "mesh.shape_bound",
    "gas.gamma",
    "gas.a_coeff",
    "gas.mu",
    "gas.lambda",
    "gas.beta",
    "gas.omega",
    "gas.pressure_regularization",
    "gas.mode",
    "scheme.T_final",
    "scheme.dt_policy",
    "scheme.dt",
    "solver.tol_abs",
    "solver.tol_rel",
    "solver.max_iters",
    "solver.relaxation",
    "solver.strategy",
    "data.rho0",
    "data.u0",
    "data.rho_b",
    "data.u_b",
    "boundary.inflow",
    "boundary.outflow",
    "mms.enabled",
    "reference.r",
    "reference.v",
    "probe.continuity",
    "probe.momentum",
    "output.dir",
    "output.snapshot_every",
    "study.levels",
    "study.seed",
];

impl RunConfig {
    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<&'static str, (usize, String)> = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| perr(ln, "unterminated section header"))?.trim();
                section = if name.is_empty() { String::new() } else { format!("{name}.") };
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| perr(ln, "expected `key = value`"))?;
            let full = format!("{section}{}", k.trim());
            let key = KEYS.iter().find(|&&x| x == full).ok_or_else(|| perr(ln, format!("unknown key `{full}`")))?;
            if map.insert(key, (ln, v.trim().to_string())).is_some() {
                return Err(perr(ln, format!("duplicate key `{full}`")));
            }
        }
        Self::from_map(&map, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn from_map(map: &BTreeMap<&'static str, (usize, String)>, base: &Path) -> Result<Self, ConfigError> {
        fn get<T>(
            map: &BTreeMap<&'static str, (usize, String)>,
            key: &'static str,
            f: impl Fn(&str) -> Result<T, String>,
        ) -> Result<Option<T>, ConfigError> {
            map.get(key).map(|(ln, v)| f(v).map_err(|m| perr(*ln, format!("{key}: {m}")))).transpose()
        }
        let num = |s: &str| parse_number(s);
        let count = |s: &str| s.parse::<usize>().map_err(|e| e.to_string());

        let mesh = match (get(map, "mesh.path", |s| Ok(base.join(s)))?, map.get("mesh.builtin")) {
            (Some(_), Some((ln, _))) => return Err(perr(*ln, "give either mesh.path or mesh.builtin")),
            (Some(p), None) => MeshSource::File(p),
            (None, Some(_)) => get(map, "mesh.builtin", parse_builtin)?.expect("present"),
            (None, None) => return Err(ConfigError::Missing("mesh.path")),
        };

        let gas = GasConfig {
            gamma: get(map, "gas.gamma", num)?.ok_or(ConfigError::Missing("gas.gamma"))?,
            a_coeff: get(map, "gas.a_coeff", num)?.unwrap_or(1.0),
            mu: get(map, "gas.mu", num)?.unwrap_or(1.0),
            lambda: get(map, "gas.lambda", num)?.unwrap_or(0.0),
            beta: get(map, "gas.beta", num)?.unwrap_or(0.25),
            omega: get(map, "gas.omega", num)?.unwrap_or(0.5),
            regularization: get(map, "gas.pressure_regularization", parse_bool)?.unwrap_or(true),
            mode: get(map, "gas.mode", |s| match s {
                "theorem" => Ok(Mode::Theorem),
                "exploratory" => Ok(Mode::Exploratory),
                _ => Err(format!("expected theorem|exploratory, found `{s}`")),
            })?
            .unwrap_or(Mode::Theorem),
        };

        let dt = get(map, "scheme.dt", num)?;
        let dt_policy = match map.get("scheme.dt_policy").map(|(ln, v)| (*ln, v.as_str())) {
            None | Some((_, "h")) => DtPolicy::MeshSize,
            Some((ln, "scaled")) => DtPolicy::Scaled(dt.ok_or_else(|| perr(ln, "dt_policy = scaled needs scheme.dt"))?),
            Some((ln, "fixed")) => DtPolicy::Fixed(dt.ok_or_else(|| perr(ln, "dt_policy = fixed needs scheme.dt"))?),
            Some((ln, other)) => return Err(perr(ln, format!("scheme.dt_policy: expected h|scaled|fixed, found `{other}`"))),
        };

        let reference = match (get(map, "reference.r", parse_field)?, get(map, "reference.v", parse_field)?) {
            (Some(r), Some(v)) => Some((r, v)),
            (None, None) => None,
            _ => return Err(ConfigError::Invalid("reference.r and reference.v go together".into())),
        };
        let u_b = get(map, "data.u_b", parse_field)?.ok_or(ConfigError::Missing("data.u_b"))?;
        let reference = reference.map(|(r, v)| Reference { r, v, u_b: u_b.clone() });
        let mms = get(map, "mms.enabled", parse_bool)?.unwrap_or(false);
        if mms && reference.is_none() {
            return Err(ConfigError::Invalid("mms.enabled needs reference.r and reference.v".into()));
        }
        // initial and inflow data default to the reference when there is one
        let rho0 = match (get(map, "data.rho0", parse_field)?, &reference) {
            (Some(f), _) => f,
            (None, Some(r)) => r.r.clone(),
            (None, None) => return Err(ConfigError::Missing("data.rho0")),
        };
        let u0 = match (get(map, "data.u0", parse_field)?, &reference) {
            (Some(f), _) => f,
            (None, Some(r)) => sum_fields(&r.v, &u_b).ok_or(ConfigError::Missing("data.u0"))?,
            (None, None) => return Err(ConfigError::Missing("data.u0")),
        };
        let rho_b = match (get(map, "data.rho_b", parse_field)?, &reference) {
            (Some(f), _) => f,
            (None, Some(r)) => r.r.clone(),
            (None, None) => rho0.clone(),
        };
        if u_b_time_dependent(&u_b) {
            return Err(ConfigError::Invalid("data.u_b must be time independent".into()));
        }

        let cfg = Self {
            mesh,
            refine: get(map, "mesh.refine", count)?.unwrap_or(0),
            shape_bound: get(map, "mesh.shape_bound", num)?.unwrap_or(20.0),
            gas,
            t_final: get(map, "scheme.T_final", num)?.ok_or(ConfigError::Missing("scheme.T_final"))?,
            dt_policy,
            tol_abs: get(map, "solver.tol_abs", num)?.unwrap_or(1e-12),
            tol_rel: get(map, "solver.tol_rel", num)?.unwrap_or(1e-10),
            max_iters: get(map, "solver.max_iters", count)?.unwrap_or(200),
            relaxation: get(map, "solver.relaxation", num)?.unwrap_or(1.0),
            strategy: get(map, "solver.strategy", |s| match s {
                "auto" => Ok(Strategy::Auto),
                "picard" => Ok(Strategy::Picard),
                "newton" => Ok(Strategy::Newton),
                _ => Err(format!("expected auto|picard|newton, found `{s}`")),
            })?
            .unwrap_or(Strategy::Auto),
            rho0,
            u0,
            rho_b,
            u_b,
            inflow: get(map, "boundary.inflow", parse_regions)?.unwrap_or_default(),
            outflow: get(map, "boundary.outflow", parse_regions)?.unwrap_or_default(),
            mms,
            reference,
            probe_continuity: get(map, "probe.continuity", parse_field)?,
            probe_momentum: get(map, "probe.momentum", parse_field)?,
            out_dir: get(map, "output.dir", |s| Ok(base.join(s)))?.unwrap_or_else(|| base.join("out")),
            snapshot_every: get(map, "output.snapshot_every", count)?.unwrap_or(1),
            levels: get(map, "study.levels", count)?.unwrap_or(3),
            seed: get(map, "study.seed", |s| s.parse::<u64>().map_err(|e| e.to_string()))?.unwrap_or(1),
        };
        if cfg.snapshot_every == 0 {
            return Err(ConfigError::Invalid("output.snapshot_every must be at least 1".into()));
        }
        cfg.scheme_params(0).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    /// Theorem-window check; returns exploratory-mode warnings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let g = &self.gas;
        GasModel::isentropic(g.a_coeff, g.gamma)?;
        Ok(validate_parameters(Some(g.gamma), g.beta, g.omega, g.regularization, g.mu, g.lambda, g.mode)?)
    }

    pub fn gas_model(&self) -> Result<GasModel, ConfigError> {
        Ok(GasModel::isentropic(self.gas.a_coeff, self.gas.gamma)?)
    }

    /// Scheme parameters. `T_final` is kept; the step follows the policy on
    /// each level's mesh.
    pub fn scheme_params(&self, _level: usize) -> SchemeParams {
        SchemeParams {
            mu: self.gas.mu,
            lambda: self.gas.lambda,
            beta: self.gas.beta,
            omega: self.gas.omega,
            regularization: self.gas.regularization,
            dt_policy: self.dt_policy,
            t_final: self.t_final,
            tol_abs: self.tol_abs,
            tol_rel: self.tol_rel,
            max_iters: self.max_iters,
            relaxation: self.relaxation,
            strategy: self.strategy,
            ..SchemeParams::default()
        }
    }
}

fn u_b_time_dependent(f: &CatalogField) -> bool {
    matches!(f, CatalogField::TrigProduct { nu, amp, .. } | CatalogField::GaussianBump { nu, amp, .. } if *nu != 0.0 && *amp != Vec3::zeros())
}

/// `a + b` when the sum is itself a catalog entry (one side constant or affine).
fn sum_fields(a: &CatalogField, b: &CatalogField) -> Option<CatalogField> {
    use CatalogField::*;
    let shift = |f: &CatalogField, c: Vec3| -> Option<CatalogField> {
        Some(match f.clone() {
            Const3 { c: d } => Const3 { c: c + d },
            Affine { a, b } => Affine { a, b: b + c },
            TrigProduct { offset, amp, k, phase, nu } => TrigProduct { offset: offset + c, amp, k, phase, nu },
            GaussianBump { offset, amp, center, width, nu } => GaussianBump { offset: offset + c, amp, center, width, nu },
        })
    };
    match (a, b) {
        (_, Const3 { c }) => shift(a, *c),
        (Const3 { c }, _) => shift(b, *c),
        (Affine { a: a1, b: b1 }, Affine { a: a2, b: b2 }) => Some(Affine { a: a1 + a2, b: b1 + b2 }),
        _ => None,
    }
}

fn parse_builtin(s: &str) -> Result<MeshSource, String> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    match toks.as_slice() {
        ["reference_tet"] => Ok(MeshSource::ReferenceTet),
        ["kuhn_cube"] => Ok(MeshSource::KuhnBox { n: [1; 3], lengths: [1.0; 3] }),
        ["kuhn_box", rest @ ..] if rest.len() == 3 || rest.len() == 6 => {
            let mut n = [0usize; 3];
            for i in 0..3 {
                n[i] = rest[i].parse().map_err(|e| format!("kuhn_box: {e}"))?;
                if n[i] == 0 {
                    return Err("kuhn_box: counts must be positive".into());
                }
            }
            let mut lengths = [1.0; 3];
            if rest.len() == 6 {
                for i in 0..3 {
                    lengths[i] = parse_number(rest[3 + i])?;
                    if !(lengths[i] > 0.0) {
                        return Err("kuhn_box: lengths must be positive".into());
                    }
                }
            }
            Ok(MeshSource::KuhnBox { n, lengths })
        }
        _ => Err(format!("expected reference_tet | kuhn_cube | kuhn_box nx ny nz [lx ly lz], found `{s}`")),
    }
}
