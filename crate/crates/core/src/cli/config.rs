use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::basis::FieldId;
use crate::error::{Error, Result};
use crate::geometry::{CartesianGrid, Point3, Side};
use crate::solver::{Formulation, SurfaceKind};
use crate::verify::NormKind;

/// Analytic or DEM topography named in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryConfig {
    None,
    Plane {
        height: f64,
        slopes: [f64; 2],
        pivot: [f64; 2],
        side: Side,
    },
    Hill {
        base: f64,
        amplitude: f64,
        wavelength: f64,
        centre: [f64; 2],
        side: Side,
    },
    Sphere {
        centre: Point3<f64>,
        radius: f64,
        inside: bool,
    },
    Dem {
        path: PathBuf,
        transect_northing: Option<f64>,
        side: Side,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub f0: f64,
    pub t0: f64,
    pub location: Point3<f64>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub location: Point3<f64>,
    pub field: FieldId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeConfig {
    pub tilt_degrees: f64,
    pub wavelength: f64,
    pub domain_length: f64,
    pub duration: Option<f64>,
    /// Fraction of the critical step; the study runs well below stability.
    pub courant: f64,
    pub norm: NormKind,
}

/// Validated run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub grid: CartesianGrid<f64>,
    pub geometry: GeometryConfig,
    pub equation: Formulation,
    pub c: f64,
    pub rho: f64,
    pub surface: SurfaceKind,
    pub order: usize,
    pub eta_pressure: f64,
    pub eta_velocity: f64,
    pub rcond: f64,
    pub source: Option<SourceConfig>,
    pub duration: f64,
    pub courant: f64,
    pub snapshot_stride: usize,
    pub receivers: Vec<ReceiverConfig>,
    pub output_dir: PathBuf,
    pub converge: ConvergeConfig,
}

/// JSON node with its dotted path, for error messages.
#[derive(Clone, Copy)]
struct Node<'a> {
    value: &'a Value,
    path: &'a str,
}

struct Owned {
    path: String,
}

impl<'a> Node<'a> {
    fn get(&self, key: &str) -> Option<(&'a Value, String)> {
        let path = if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        };
        match self.value.get(key) {
            None | Some(Value::Null) => None,
            Some(v) => Some((v, path)),
        }
    }
}

fn missing(path: String) -> Error {
    Error::config(path, "missing required key")
}

fn num(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::config(path, format!("expected a number, got {v}")))
}

fn count(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::config(path, format!("expected a non-negative integer, got {v}")))
}

fn text<'v>(v: &'v Value, path: &str) -> Result<&'v str> {
    v.as_str().ok_or_else(|| Error::config(path, format!("expected a string, got {v}")))
}

fn nums(v: &Value, path: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::config(path, format!("expected an array, got {v}")))?
        .iter()
        .map(|x| num(x, path))
        .collect()
}

fn counts(v: &Value, path: &str) -> Result<Vec<usize>> {
    v.as_array()
        .ok_or_else(|| Error::config(path, format!("expected an array, got {v}")))?
        .iter()
        .map(|x| count(x, path))
        .collect()
}

fn object<'a>(v: &'a Value, path: &'a str) -> Result<Node<'a>> {
    if v.is_object() {
        Ok(Node { value: v, path })
    } else {
        Err(Error::config(path, format!("expected an object, got {v}")))
    }
}

fn point(v: &Value, path: &str, nd: usize) -> Result<Point3<f64>> {
    let xs = nums(v, path)?;
    if xs.len() != nd {
        return Err(Error::config(path, format!("expected {nd} coordinates, got {}", xs.len())));
    }
    let mut p = [0.0; 3];
    p[..nd].copy_from_slice(&xs);
    Ok(p)
}

fn pair(v: &Value, path: &str, n: usize) -> Result<[f64; 2]> {
    let xs = nums(v, path)?;
    if xs.len() != n {
        return Err(Error::config(path, format!("expected {n} values, got {}", xs.len())));
    }
    let mut p = [0.0; 2];
    p[..n].copy_from_slice(&xs);
    Ok(p)
}

fn side(node: Node<'_>) -> Result<Side> {
    match node.get("side") {
        None => Ok(Side::Below),
        Some((v, p)) => match text(v, &p)? {
            "below" => Ok(Side::Below),
            "above" => Ok(Side::Above),
            s => Err(Error::config(p, format!("expected `below` or `above`, got `{s}`"))),
        },
    }
}

fn opt_num(node: Node<'_>, key: &str, default: f64) -> Result<f64> {
    node.get(key).map_or(Ok(default), |(v, p)| num(v, &p))
}

fn req_num(node: Node<'_>, key: &str) -> Result<f64> {
    let (v, p) = node.get(key).ok_or_else(|| missing(join(node.path, key)))?;
    num(v, &p)
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.into()
    } else {
        format!("{path}.{key}")
    }
}

fn section<'a>(root: Node<'a>, key: &str, store: &'a mut Owned) -> Result<Option<Node<'a>>> {
    store.path = join(root.path, key);
    match root.value.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => object(v, &store.path).map(Some),
    }
}

fn geometry(node: Option<Node<'_>>, nd: usize) -> Result<GeometryConfig> {
    let Some(g) = node else {
        return Ok(GeometryConfig::None);
    };
    let nh = nd.saturating_sub(1);
    let (kv, kp) = g.get("kind").ok_or_else(|| missing(join(g.path, "kind")))?;
    let kind = text(kv, &kp)?;
    let horizontal = |key: &str| -> Result<[f64; 2]> {
        match g.get(key) {
            None => Ok([0.0; 2]),
            Some((v, p)) => pair(v, &p, nh),
        }
    };
    if nd < 2 && !matches!(kind, "none" | "sphere") {
        return Err(Error::config(kp, "surface topography needs a 2D or 3D grid"));
    }
    Ok(match kind {
        "none" => GeometryConfig::None,
        "flat" | "plane" => GeometryConfig::Plane {
            height: req_num(g, "height")?,
            slopes: if kind == "flat" { [0.0; 2] } else { horizontal("slopes")? },
            pivot: horizontal("pivot")?,
            side: side(g)?,
        },
        "hill" => GeometryConfig::Hill {
            base: req_num(g, "base")?,
            amplitude: req_num(g, "amplitude")?,
            wavelength: {
                let w = req_num(g, "wavelength")?;
                if w <= 0.0 {
                    return Err(Error::config(join(g.path, "wavelength"), "must be positive"));
                }
                w
            },
            centre: horizontal("centre")?,
            side: side(g)?,
        },
        "sphere" => GeometryConfig::Sphere {
            centre: {
                let (v, p) = g.get("centre").ok_or_else(|| missing(join(g.path, "centre")))?;
                point(v, &p, nd)?
            },
            radius: req_num(g, "radius")?,
            inside: match g.get("inside") {
                None => true,
                Some((v, p)) => v.as_bool().ok_or_else(|| Error::config(p, "expected a boolean"))?,
            },
        },
        "dem" => GeometryConfig::Dem {
            path: {
                let (v, p) = g.get("path").ok_or_else(|| missing(join(g.path, "path")))?;
                PathBuf::from(text(v, &p)?)
            },
            transect_northing: g.get("transect_northing").map(|(v, p)| num(v, &p)).transpose()?,
            side: side(g)?,
        },
        other => {
            return Err(Error::config(
                kp,
                format!("unknown geometry `{other}` (expected none, flat, plane, hill, sphere or dem)"),
            ))
        }
    })
}

/// Parses and validates a JSON configuration, filling defaults.
pub fn parse_config(document: &str) -> Result<SimulationConfig> {
    let value: Value = serde_json::from_str(document).map_err(|e| Error::config("<document>", e.to_string()))?;
    let root = object(&value, "")?;

    let mut s_grid = Owned { path: String::new() };
    let g = section(root, "grid", &mut s_grid)?.ok_or_else(|| missing("grid".into()))?;
    let shape = {
        let (v, p) = g.get("shape").ok_or_else(|| missing("grid.shape".into()))?;
        counts(v, &p)?
    };
    let nd = shape.len();
    let spacing = match g.get("spacing") {
        Some((v, p)) => nums(v, &p)?,
        None => return Err(missing("grid.spacing".into())),
    };
    let origin = match g.get("origin") {
        Some((v, p)) => nums(v, &p)?,
        None => vec![0.0; nd],
    };
    let grid = CartesianGrid::new(&shape, &spacing, &origin)?;

    let mut s_geom = Owned { path: String::new() };
    let geometry = geometry(section(root, "geometry", &mut s_geom)?, nd)?;

    let equation = {
        let (v, p) = root.get("equation").ok_or_else(|| missing("equation".into()))?;
        match text(v, &p)? {
            "acoustic2" => Formulation::SecondOrder,
            "acoustic1" => Formulation::FirstOrder,
            e => return Err(Error::config(p, format!("expected `acoustic2` or `acoustic1`, got `{e}`"))),
        }
    };

    let mut s_mat = Owned { path: String::new() };
    let m = section(root, "material", &mut s_mat)?.ok_or_else(|| missing("material".into()))?;
    let c = req_num(m, "c")?;
    let rho = opt_num(m, "rho", 1.0)?;
    if c <= 0.0 {
        return Err(Error::config("material.c", "wavespeed must be positive"));
    }
    if rho <= 0.0 {
        return Err(Error::config("material.rho", "density must be positive"));
    }

    let mut s_bnd = Owned { path: String::new() };
    let b = section(root, "boundary", &mut s_bnd)?;
    let mut surface = SurfaceKind::Free;
    let mut order = 4;
    let mut eta_pressure = 0.5;
    let mut eta_velocity = 0.0;
    let mut rcond = 0.0;
    if let Some(b) = b {
        if let Some((v, p)) = b.get("kind") {
            surface = match text(v, &p)? {
                "free" => SurfaceKind::Free,
                "rigid" => SurfaceKind::Rigid,
                k => return Err(Error::config(p, format!("expected `free` or `rigid`, got `{k}`"))),
            };
        }
        if let Some((v, p)) = b.get("order") {
            order = count(v, &p)?;
        }
        if let Some((v, p)) = b.get("eta") {
            let e = object(v, &p)?;
            eta_pressure = opt_num(e, "pressure", eta_pressure)?;
            eta_velocity = opt_num(e, "velocity", eta_velocity)?;
        }
        rcond = opt_num(b, "rcond", 0.0)?;
    }
    if order < 2 || order % 2 != 0 {
        return Err(Error::config("boundary.order", format!("order must be even and at least 2, got {order}")));
    }
    for (key, eta) in [("boundary.eta.pressure", eta_pressure), ("boundary.eta.velocity", eta_velocity)] {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::config(key, format!("eta must lie in [0, 1), got {eta}")));
        }
    }
    if rcond < 0.0 {
        return Err(Error::config("boundary.rcond", "must be non-negative"));
    }

    let mut s_src = Owned { path: String::new() };
    let source = match section(root, "source", &mut s_src)? {
        None => None,
        Some(s) => {
            let f0 = req_num(s, "f0")?;
            if f0 <= 0.0 {
                return Err(Error::config("source.f0", "peak frequency must be positive"));
            }
            let (v, p) = s.get("location").ok_or_else(|| missing("source.location".into()))?;
            Some(SourceConfig {
                f0,
                t0: opt_num(s, "t0", 1.0 / f0)?,
                location: point(v, &p, nd)?,
                amplitude: opt_num(s, "amplitude", 1.0)?,
            })
        }
    };

    let mut s_time = Owned { path: String::new() };
    let t = section(root, "time", &mut s_time)?.ok_or_else(|| missing("time".into()))?;
    let duration = req_num(t, "duration")?;
    if duration <= 0.0 {
        return Err(Error::config("time.duration", "must be positive"));
    }
    let courant = opt_num(t, "courant", 0.5)?;
    if !(courant > 0.0 && courant <= 1.0) {
        return Err(Error::config("time.courant", format!("courant fraction must lie in (0, 1], got {courant}")));
    }

    let mut s_out = Owned { path: String::new() };
    let o = section(root, "outputs", &mut s_out)?;
    let mut snapshot_stride = 100;
    let mut receivers = Vec::new();
    let mut output_dir = PathBuf::from("out");
    if let Some(o) = o {
        if let Some((v, p)) = o.get("snapshot_stride") {
            snapshot_stride = count(v, &p)?;
        }
        if let Some((v, p)) = o.get("directory") {
            output_dir = PathBuf::from(text(v, &p)?);
        }
        if let Some((v, p)) = o.get("receivers") {
            let list = v
                .as_array()
                .ok_or_else(|| Error::config(p.clone(), "expected an array of receivers"))?;
            for (i, r) in list.iter().enumerate() {
                let rp = format!("{p}[{i}]");
                let node = object(r, &rp)?;
                let (lv, lp) = node.get("location").ok_or_else(|| missing(format!("{rp}.location")))?;
                let field = match node.get("field") {
                    None => FieldId::PRESSURE,
                    Some((fv, fp)) => {
                        let name = text(fv, &fp)?;
                        FieldId::parse(name).ok_or_else(|| Error::config(fp, format!("unknown field `{name}`")))?
                    }
                };
                receivers.push(ReceiverConfig {
                    location: point(lv, &lp, nd)?,
                    field,
                });
            }
        }
    }
    if snapshot_stride < 1 {
        return Err(Error::config("outputs.snapshot_stride", "must be at least 1"));
    }

    let mut s_conv = Owned { path: String::new() };
    let mut converge = ConvergeConfig {
        tilt_degrees: 30.0,
        wavelength: 1.0,
        domain_length: 2.0,
        duration: None,
        courant: 0.1,
        norm: NormKind::LInf,
    };
    if let Some(cv) = section(root, "converge", &mut s_conv)? {
        converge.tilt_degrees = opt_num(cv, "tilt_degrees", converge.tilt_degrees)?;
        converge.wavelength = opt_num(cv, "wavelength", converge.wavelength)?;
        converge.domain_length = opt_num(cv, "domain_length", converge.domain_length)?;
        converge.duration = cv.get("duration").map(|(v, p)| num(v, &p)).transpose()?;
        converge.courant = opt_num(cv, "courant", converge.courant)?;
        if !(converge.courant > 0.0 && converge.courant <= 1.0) {
            return Err(Error::config("converge.courant", "courant fraction must lie in (0, 1]"));
        }
        if let Some((v, p)) = cv.get("norm") {
            converge.norm = match text(v, &p)? {
                "linf" => NormKind::LInf,
                "l2" => NormKind::L2,
                n => return Err(Error::config(p, format!("expected `linf` or `l2`, got `{n}`"))),
            };
        }
        if converge.wavelength <= 0.0 || converge.domain_length <= 0.0 {
            return Err(Error::config("converge", "wavelength and domain_length must be positive"));
        }
    }

    Ok(SimulationConfig {
        grid,
        geometry,
        equation,
        c,
        rho,
        surface,
        order,
        eta_pressure,
        eta_velocity,
        rcond,
        source,
        duration,
        courant,
        snapshot_stride,
        receivers,
        output_dir,
        converge,
    })
}

/// Reads a configuration file; relative DEM paths resolve against its
/// directory.
pub fn read_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let GeometryConfig::Dem { path: dem, .. } = &mut cfg.geometry {
        if dem.is_relative() {
            if let Some(dir) = path.parent() {
                *dem = dir.join(&*dem);
            }
        }
    }
    Ok(cfg)
}
