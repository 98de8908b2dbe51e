use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use super::{Euclidean, HadamardSpace, MetricTree, Spd};
use crate::error::{Error, Result};

/// Leg length of `star:<legs>` when none is given.
pub const DEFAULT_STAR_LENGTH: f64 = 10.0;

/// Space grammar: `euclidean:<d>`, `spd:<d>`, `tree:<file>` and the shorthand
/// `star:<legs>[:<length>]` for a star tree with equal legs.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceSpec {
    Euclidean(usize),
    Spd(usize),
    Tree(PathBuf),
    Star { legs: usize, length: f64 },
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Euclidean(d) => write!(f, "euclidean:{d}"),
            Self::Spd(d) => write!(f, "spd:{d}"),
            Self::Tree(p) => write!(f, "tree:{}", p.display()),
            Self::Star { legs, length } => write!(f, "star:{legs}:{length}"),
        }
    }
}

impl FromStr for SpaceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown space `{s}`"));
        let (head, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let count = |v: &str| v.parse::<usize>().map_err(|_| Error::Parse(format!("bad count `{v}` in `{s}`")));
        match head {
            "euclidean" => Ok(Self::Euclidean(count(rest)?)),
            "spd" => Ok(Self::Spd(count(rest)?)),
            "tree" if !rest.is_empty() => Ok(Self::Tree(PathBuf::from(rest))),
            "star" => {
                let (legs, length) = match rest.split_once(':') {
                    Some((l, len)) => {
                        (l, len.parse::<f64>().map_err(|_| Error::Parse(format!("bad length `{len}` in `{s}`")))?)
                    }
                    None => (rest, DEFAULT_STAR_LENGTH),
                };
                Ok(Self::Star { legs: count(legs)?, length })
            }
            _ => Err(bad()),
        }
    }
}

/// A constructed space of any built-in model.
#[derive(Debug, Clone)]
pub enum AnySpace {
    Euclidean(Euclidean),
    Spd(Spd),
    Tree(MetricTree),
}

impl SpaceSpec {
    pub fn build(&self) -> Result<AnySpace> {
        Ok(match self {
            Self::Euclidean(d) => AnySpace::Euclidean(Euclidean::new(*d)?),
            Self::Spd(d) => AnySpace::Spd(Spd::new(*d)?),
            Self::Tree(path) => AnySpace::Tree(MetricTree::parse_edge_list(&std::fs::read_to_string(path)?)?),
            Self::Star { legs, length } => AnySpace::Tree(MetricTree::star(*legs, *length)?),
        })
    }
}

/// Runs `$body` with `$s` bound to the concrete space inside an [`AnySpace`].
#[macro_export]
macro_rules! with_space {
    ($any:expr, |$s:ident| $body:expr) => {
        match $any {
            $crate::spaces::AnySpace::Euclidean($s) => $body,
            $crate::spaces::AnySpace::Spd($s) => $body,
            $crate::spaces::AnySpace::Tree($s) => $body,
        }
    };
}

/// Reads points in the CSV point format; no header, one point per record.
pub fn read_points<S: HadamardSpace, R: Read>(space: &S, reader: R) -> Result<Vec<S::Point>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().collect();
        let p = space.parse_point(&fields)?;
        space.check_point(&p)?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_points<S: HadamardSpace, W: Write>(space: &S, points: &[S::Point], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for p in points {
        w.write_record(space.format_point(p))?;
    }
    w.flush()?;
    Ok(())
}
