use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use tnlab::state::{LatticeSpec, DEFAULT_AMPLITUDE_CAP};
use tnlab::{Error, Result};

/// Version of every JSON document and CSV preamble written by the tool.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A torus size written as `RxC` or a single `L` for `LxL`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Size {
    pub rows: usize,
    pub cols: usize,
}

impl Size {
    pub fn is_square(self) -> bool {
        self.rows == self.cols
    }
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad lattice size {s:?}, expected RxC"));
        let (rows, cols) = match s.split_once(['x', 'X']) {
            Some((r, c)) => (parse(r)?, parse(c)?),
            None => {
                let l = parse(s)?;
                (l, l)
            }
        };
        if rows < 2 || cols < 2 {
            return Err(format!("lattice size {s:?} must be at least 2x2"));
        }
        Ok(Size { rows, cols })
    }
}

impl std::fmt::Display for Size {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub sizes: Vec<Size>,
    pub bond_dim: usize,
    pub phys_dim: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: Format,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn lattice(&self, size: Size) -> Result<LatticeSpec> {
        LatticeSpec::new(size.rows, size.cols, self.bond_dim, self.phys_dim)
    }

    /// Every size as a lattice, rejecting anything above the contraction caps.
    pub fn lattices(&self) -> Result<Vec<LatticeSpec>> {
        self.sizes
            .iter()
            .map(|&s| {
                let spec = self.lattice(s)?;
                spec.check_caps(DEFAULT_AMPLITUDE_CAP).map_err(|e| match e {
                    Error::ResourceLimit(msg) => Error::ResourceLimit(format!(
                        "{msg}; pick a smaller --sizes entry or lower --bond-dim/--phys-dim"
                    )),
                    other => other,
                })?;
                Ok(spec)
            })
            .collect()
    }

    /// Square torus sides, each at most `max_side`.
    pub fn tori(&self, max_side: usize, what: &str) -> Result<Vec<usize>> {
        self.sizes
            .iter()
            .map(|s| {
                if !s.is_square() {
                    return Err(Error::InvalidArgument(format!("{what} needs square tori, got {s}")));
                }
                if s.rows > max_side {
                    return Err(Error::ResourceLimit(format!(
                        "{what} at L={} exceeds the cap L<={max_side}; pass --sizes with smaller tori",
                        s.rows
                    )));
                }
                Ok(s.rows)
            })
            .collect()
    }

    pub fn require_samples(&self, min: usize) -> Result<()> {
        if self.n_samples < min {
            return Err(Error::InvalidArgument(format!("--samples must be at least {min}")));
        }
        Ok(())
    }

    pub fn path(&self, stem: &str) -> PathBuf {
        self.out_dir.join(format!("{stem}.{}", self.format.extension()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse() {
        assert_eq!("3x4".parse::<Size>().unwrap(), Size { rows: 3, cols: 4 });
        assert_eq!("3".parse::<Size>().unwrap(), Size { rows: 3, cols: 3 });
        assert!("1x4".parse::<Size>().is_err());
        assert!("ax4".parse::<Size>().is_err());
    }
}
