use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{fmt_real, write_text};

/// Axis-aligned evaluation grid; `n = 1` along an axis uses the midpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        let vals = [xmin, xmax, ymin, ymax];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid bounds"));
        }
        if xmin > xmax || ymin > ymax {
            return Err(Error::invalid("grid", "min must not exceed max"));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid", "nx and ny must be at least 1"));
        }
        Ok(Self {
            xmin,
            xmax,
            ymin,
            ymax,
            nx,
            ny,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order, `y` outer and `x` inner.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let xs = axis(self.xmin, self.xmax, self.nx);
        let ys = axis(self.ymin, self.ymax, self.ny);
        ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect()
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
}

/// Parses `xmin,xmax,ymin,ymax,nx,ny`.
impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidValue {
            key: "grid".into(),
            reason: format!("expected xmin,xmax,ymin,ymax,nx,ny, got `{s}`"),
        };
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(bad());
        }
        let mut b = [0.0; 4];
        for (v, p) in b.iter_mut().zip(&parts) {
            *v = p.parse().map_err(|_| bad())?;
        }
        let nx = parts[4].parse().map_err(|_| bad())?;
        let ny = parts[5].parse().map_err(|_| bad())?;
        Self::new(b[0], b[1], b[2], b[3], nx, ny)
    }
}

/// Max-softmax confidence and argmax class per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct GridData<T> {
    pub spec: GridSpec,
    pub conf: Vec<T>,
    pub argmax: Vec<usize>,
}

pub fn format_grid<T: Scalar>(grid: &GridData<T>) -> String {
    let s = grid.spec;
    let mut out = format!(
        "# grid {} {} {} {} {} {}\nx,y,conf,argmax\n",
        fmt_real(s.xmin),
        fmt_real(s.xmax),
        fmt_real(s.ymin),
        fmt_real(s.ymax),
        s.nx,
        s.ny
    );
    for ((p, &c), &k) in s.points().iter().zip(&grid.conf).zip(&grid.argmax) {
        let _ = writeln!(out, "{},{},{},{k}", fmt_real(p[0]), fmt_real(p[1]), fmt_real(c));
    }
    out
}

pub fn write_grid<T: Scalar>(path: &Path, grid: &GridData<T>) -> Result<()> {
    write_text(path, &format_grid(grid))
}

pub fn read_grid<T: Scalar>(path: &Path) -> Result<GridData<T>> {
    parse_grid(&std::fs::read_to_string(path)?, path)
}

pub fn parse_grid<T: Scalar>(text: &str, source: &Path) -> Result<GridData<T>> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let meta = lines.next().unwrap_or_default();
    let fields: Vec<&str> = meta.split_whitespace().collect();
    if fields.len() != 8 || fields[0] != "#" || fields[1] != "grid" {
        return Err(err(1, "expected `# grid xmin xmax ymin ymax nx ny`".into()));
    }
    let spec: GridSpec = fields[2..]
        .join(",")
        .parse()
        .map_err(|e: Error| err(1, e.to_string()))?;
    if lines.next() != Some("x,y,conf,argmax") {
        return Err(err(2, "expected header x,y,conf,argmax".into()));
    }
    let mut conf = Vec::with_capacity(spec.len());
    let mut argmax = Vec::with_capacity(spec.len());
    for (i, raw) in lines.enumerate() {
        let line = i + 3;
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 4 {
            return Err(err(line, format!("expected 4 fields, found {}", f.len())));
        }
        let c: f64 = f[2].parse().map_err(|_| err(line, format!("bad confidence `{}`", f[2])))?;
        if !(c > 0.0 && c <= 1.0) {
            return Err(err(line, format!("confidence {c} outside (0, 1]")));
        }
        conf.push(T::lit(c));
        argmax.push(f[3].parse().map_err(|_| err(line, format!("bad class `{}`", f[3])))?);
    }
    if conf.len() != spec.len() {
        return Err(err(
            conf.len() + 3,
            format!("expected {} grid rows, found {}", spec.len(), conf.len()),
        ));
    }
    Ok(GridData { spec, conf, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_are_row_major_y_outer() {
        let g = GridSpec::new(0.0, 1.0, -1.0, 1.0, 2, 3).unwrap();
        assert_eq!(
            g.points(),
            vec![[0.0, -1.0], [1.0, -1.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
        );
        let single: GridSpec = "0.5,1.5,0.5,1.5,1,1".parse().unwrap();
        assert_eq!(single.points(), vec![[1.0, 1.0]]);
    }

    #[test]
    fn spec_parsing() {
        assert!("0,1,0,1,0,3".parse::<GridSpec>().is_err());
        assert!("0,1,0,1,2".parse::<GridSpec>().is_err());
        assert!("1,0,0,1,2,2".parse::<GridSpec>().is_err());
        assert!(" -4, 4 ,-4,4,64,64".parse::<GridSpec>().is_ok());
    }

    #[test]
    fn round_trip() {
        let spec = GridSpec::new(-1.0, 1.0, -2.0, 2.0, 3, 2).unwrap();
        let grid = GridData {
            spec,
            conf: vec![0.25, 0.5, 1.0, 0.9, 0.3333333333333333, 0.7],
            argmax: vec![0, 1, 2, 3, 0, 1],
        };
        let text = format_grid(&grid);
        assert!(text.starts_with("# grid "));
        let back: GridData<f64> = parse_grid(&text, Path::new("g")).unwrap();
        assert_eq!(back, grid);
        assert!(parse_grid::<f64>(&text.replace("1.0000000000000000e0,2\n", "0e0,2\n"), Path::new("g")).is_err());
    }
}
