//! Pixelated unit cells: the inclusion indicator on an `R^N` grid, named
//! geometry generators and the JSON file format.

use std::path::Path;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Microstructure {
    dim: usize,
    resolution: usize,
    chi: Vec<bool>,
    count: usize,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidMicrostructure(msg.into())
}

impl Microstructure {
    pub fn new(dim: usize, resolution: usize, chi: Vec<bool>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if resolution < 2 {
            return Err(invalid(format!("resolution {resolution} is below 2")));
        }
        let n = resolution
            .checked_pow(dim as u32)
            .ok_or_else(|| invalid("grid too large"))?;
        if chi.len() != n {
            return Err(invalid(format!("expected {n} pixels, got {}", chi.len())));
        }
        let count = chi.iter().filter(|c| **c).count();
        Ok(Self { dim, resolution, chi, count })
    }

    pub fn from_fn(dim: usize, resolution: usize, f: impl Fn(&[usize]) -> bool) -> Result<Self> {
        let n = resolution.pow(dim as u32);
        let chi = (0..n)
            .map(|mut idx| {
                let c: Vec<usize> = (0..dim)
                    .map(|_| {
                        let c = idx % resolution;
                        idx /= resolution;
                        c
                    })
                    .collect();
                f(&c)
            })
            .collect();
        Self::new(dim, resolution, chi)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn chi(&self) -> &[bool] {
        &self.chi
    }

    pub fn inclusion_count(&self) -> usize {
        self.count
    }

    /// Inclusion volume fraction, exact in the sense `count / R^N`.
    pub fn theta(&self) -> f64 {
        self.count as f64 / self.chi.len() as f64
    }

    /// Layers perpendicular to `axis`: the first `round(theta R)` slabs are inclusion.
    pub fn stripe(dim: usize, resolution: usize, theta: f64, axis: usize) -> Result<Self> {
        if axis >= dim {
            return Err(invalid(format!("stripe axis {axis} out of range for dimension {dim}")));
        }
        check_fraction(theta)?;
        let layers = (theta * resolution as f64).round() as usize;
        Self::from_fn(dim, resolution, |c| c[axis] < layers)
    }

    /// Two-by-two (by-two) checkerboard; needs an even resolution to be pixel exact.
    pub fn checkerboard(dim: usize, resolution: usize) -> Result<Self> {
        if resolution % 2 != 0 {
            return Err(invalid("checkerboard needs an even resolution"));
        }
        let half = resolution / 2;
        Self::from_fn(dim, resolution, |c| c.iter().filter(|&&x| x >= half).count() % 2 == 1)
    }

    /// Centred disk (ball in 3-D) of radius `radius_fraction` times the cell
    /// side; a pixel is inclusion when its centre lies inside.
    pub fn disk(dim: usize, resolution: usize, radius_fraction: f64) -> Result<Self> {
        if !(radius_fraction > 0.0 && radius_fraction <= 0.5) {
            return Err(invalid(format!("disk radius {radius_fraction} outside (0, 0.5]")));
        }
        let h = 1.0 / resolution as f64;
        let r2 = radius_fraction * radius_fraction;
        Self::from_fn(dim, resolution, |c| {
            c.iter().map(|&x| ((x as f64 + 0.5) * h - 0.5).powi(2)).sum::<f64>() < r2
        })
    }

    /// Exactly `round(theta R^N)` inclusion pixels drawn without replacement.
    pub fn random(dim: usize, resolution: usize, theta: f64, seed: u64) -> Result<Self> {
        check_fraction(theta)?;
        let n = resolution.pow(dim as u32);
        let count = (theta * n as f64).round() as usize;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut chi = vec![false; n];
        for i in rand::seq::index::sample(&mut rng, n, count) {
            chi[i] = true;
        }
        Self::new(dim, resolution, chi)
    }

    /// [`Microstructure::random`] on a coarse grid of `resolution / grain`
    /// cells, each refined into a `grain^N` block.
    pub fn random_grains(dim: usize, resolution: usize, theta: f64, seed: u64, grain: usize) -> Result<Self> {
        if grain == 0 || resolution % grain != 0 || resolution / grain < 2 {
            return Err(invalid(format!(
                "grain {grain} must divide resolution {resolution} with at least 2 grains per side"
            )));
        }
        Ok(Self::random(dim, resolution / grain, theta, seed)?.refined(grain))
    }

    /// Periodic translation by `shift` pixels along each axis.
    pub fn shifted(&self, shift: &[usize]) -> Self {
        let r = self.resolution;
        Self::from_fn(self.dim, r, |c| {
            let src: Vec<usize> = c.iter().zip(shift).map(|(x, s)| (x + r - s % r) % r).collect();
            self.chi[src.iter().rev().fold(0, |acc, &v| acc * r + v)]
        })
        .expect("same shape as self")
    }

    /// Each pixel split into `factor^N` pixels.
    pub fn refined(&self, factor: usize) -> Self {
        Self::from_fn(self.dim, self.resolution * factor, |c| {
            let src: Vec<usize> = c.iter().map(|x| x / factor).collect();
            self.chi[src.iter().rev().fold(0, |acc, &v| acc * self.resolution + v)]
        })
        .expect("refinement keeps dimensions valid")
    }

    /// Phases swapped.
    pub fn complement(&self) -> Self {
        Self::new(self.dim, self.resolution, self.chi.iter().map(|c| !c).collect())
            .expect("same shape as self")
    }

    pub fn to_file(&self, encoding: Encoding) -> MicrostructureFile {
        match encoding {
            Encoding::Dense => MicrostructureFile {
                dim: self.dim,
                resolution: self.resolution,
                encoding,
                data: Some(self.chi.iter().map(|&c| if c { '1' } else { '0' }).collect()),
                runs: None,
            },
            Encoding::Rle => {
                let mut runs: Vec<(u8, usize)> = Vec::new();
                for &c in &self.chi {
                    let v = c as u8;
                    match runs.last_mut() {
                        Some((last, len)) if *last == v => *len += 1,
                        _ => runs.push((v, 1)),
                    }
                }
                MicrostructureFile {
                    dim: self.dim,
                    resolution: self.resolution,
                    encoding,
                    data: None,
                    runs: Some(runs),
                }
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: MicrostructureFile = serde_json::from_str(&text)?;
        file.into_microstructure()
    }
}

fn check_fraction(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidFraction { value: theta, range: "[0, 1]" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Dense,
    Rle,
}

/// On-disk form: `{"dim", "resolution", "encoding": "dense"|"rle"}` plus either
/// `data` (a `0`/`1` string, axis 0 fastest) or `runs` (`[value, length]` pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrostructureFile {
    pub dim: usize,
    pub resolution: usize,
    pub encoding: Encoding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<Vec<(u8, usize)>>,
}

impl MicrostructureFile {
    pub fn into_microstructure(self) -> Result<Microstructure> {
        let chi = match (self.encoding, self.data, self.runs) {
            (Encoding::Dense, Some(data), None) => data
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(invalid(format!("unexpected character {other:?} in dense data"))),
                })
                .collect::<Result<Vec<_>>>()?,
            (Encoding::Rle, None, Some(runs)) => {
                let mut chi = Vec::new();
                for (v, len) in runs {
                    if v > 1 {
                        return Err(invalid(format!("run value {v} is not 0 or 1")));
                    }
                    chi.extend(std::iter::repeat_n(v == 1, len));
                }
                chi
            }
            (Encoding::Dense, _, _) => return Err(invalid("dense encoding needs `data` and no `runs`")),
            (Encoding::Rle, _, _) => return Err(invalid("rle encoding needs `runs` and no `data`")),
        };
        Microstructure::new(self.dim, self.resolution, chi)
    }
}

/// A named geometry, parsed from `name(arg, ...)` or `name:arg:...`.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedGeometry {
    Stripe { theta: f64, axis: usize },
    Checkerboard,
    Disk { radius_fraction: f64 },
    /// The seed may be left out here and supplied separately; it is never defaulted.
    /// `grain` is the side in pixels of each random block (1 for i.i.d. pixels).
    Random { theta: f64, seed: Option<u64>, grain: usize },
}

impl NamedGeometry {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args): (&str, Vec<&str>) = if let Some(open) = text.find('(') {
            let inner = text[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| invalid(format!("missing ')' in {text:?}")))?;
            let args = if inner.trim().is_empty() {
                vec![]
            } else {
                inner.split(',').map(str::trim).collect()
            };
            (&text[..open], args)
        } else {
            let mut parts = text.split(':');
            let name = parts.next().unwrap_or_default();
            (name, parts.map(str::trim).collect())
        };
        let num = |i: usize| -> Result<f64> {
            args.get(i)
                .ok_or_else(|| invalid(format!("{name} is missing argument {}", i + 1)))?
                .parse::<f64>()
                .map_err(|e| invalid(format!("{name} argument {}: {e}", i + 1)))
        };
        let int = |i: usize| -> Result<u64> {
            args.get(i)
                .ok_or_else(|| invalid(format!("{name} is missing argument {}", i + 1)))?
                .parse::<u64>()
                .map_err(|e| invalid(format!("{name} argument {}: {e}", i + 1)))
        };
        let arity = |lo: usize, hi: usize| -> Result<()> {
            if args.len() < lo || args.len() > hi {
                return Err(invalid(format!("{name} takes {lo}..={hi} arguments, got {}", args.len())));
            }
            Ok(())
        };
        match name.trim() {
            "stripe" => {
                arity(1, 2)?;
                let axis = if args.len() > 1 { int(1)? as usize } else { 0 };
                Ok(Self::Stripe { theta: num(0)?, axis })
            }
            "checkerboard" => {
                arity(0, 0)?;
                Ok(Self::Checkerboard)
            }
            "disk" => {
                arity(1, 1)?;
                Ok(Self::Disk { radius_fraction: num(0)? })
            }
            "random" => {
                arity(1, 3)?;
                let seed = if args.len() > 1 { Some(int(1)?) } else { None };
                let grain = if args.len() > 2 { int(2)? as usize } else { 1 };
                Ok(Self::Random { theta: num(0)?, seed, grain })
            }
            other => Err(invalid(format!("unknown geometry {other:?}"))),
        }
    }

    pub fn needs_seed(&self) -> bool {
        matches!(self, Self::Random { seed: None, .. })
    }

    /// Builds the cell. `seed` fills in a random geometry's missing seed.
    pub fn build(&self, dim: usize, resolution: usize, seed: Option<u64>) -> Result<Microstructure> {
        match *self {
            Self::Stripe { theta, axis } => Microstructure::stripe(dim, resolution, theta, axis),
            Self::Checkerboard => Microstructure::checkerboard(dim, resolution),
            Self::Disk { radius_fraction } => Microstructure::disk(dim, resolution, radius_fraction),
            Self::Random { theta, seed: own, grain } => {
                let seed = own
                    .or(seed)
                    .ok_or_else(|| invalid("random geometry requires a seed"))?;
                Microstructure::random_grains(dim, resolution, theta, seed, grain)
            }
        }
    }
}
