//! Immutable observed-data table and its CSV schema.
//!
//! Columns: `z, s, y, a, w, c[, c2, c3, ...]` plus latent `u, g` when a
//! synthetic dataset carries ground truth. `y` may be empty only for
//! records with `s = 0` (truncated outcomes). Floats are written with 17
//! significant digits so a write/read round trip is bit-exact.

use crate::error::{Error, Result};
use crate::models::{Covariates, PrincipalStratum};

/// Ground truth carried by synthetic datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTruth {
    pub u: Vec<f64>,
    pub g: Vec<PrincipalStratum>,
}

/// Column-oriented table of observed records (Z, S, Y?, A, W, C).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    z: Vec<u8>,
    s: Vec<u8>,
    y: Vec<Option<f64>>,
    a: Vec<f64>,
    w: Vec<f64>,
    /// Baseline covariates, column-major: `c[j][i]` is column j of record i.
    c: Vec<Vec<f64>>,
    latent: Option<LatentTruth>,
}

impl Dataset {
    pub fn new(
        z: Vec<u8>,
        s: Vec<u8>,
        y: Vec<Option<f64>>,
        a: Vec<f64>,
        w: Vec<f64>,
        c: Vec<Vec<f64>>,
        latent: Option<LatentTruth>,
    ) -> Result<Self> {
        let n = z.len();
        if s.len() != n || y.len() != n || a.len() != n || w.len() != n {
            return Err(Error::Schema("column lengths differ".into()));
        }
        if c.is_empty() {
            return Err(Error::Schema("at least one baseline covariate column required".into()));
        }
        for col in &c {
            if col.len() != n {
                return Err(Error::Schema("column lengths differ".into()));
            }
        }
        if let Some(lat) = &latent {
            if lat.u.len() != n || lat.g.len() != n {
                return Err(Error::Schema("latent column lengths differ".into()));
            }
        }
        for i in 0..n {
            if z[i] > 1 {
                return Err(Error::Schema(format!("row {}: z must be 0 or 1", i + 1)));
            }
            if s[i] > 1 {
                return Err(Error::Schema(format!("row {}: s must be 0 or 1", i + 1)));
            }
            let finite = a[i].is_finite()
                && w[i].is_finite()
                && c.iter().all(|col| col[i].is_finite())
                && y[i].map_or(true, |v| v.is_finite());
            if !finite {
                return Err(Error::Schema(format!("row {}: non-finite value", i + 1)));
            }
            if y[i].is_none() && s[i] == 1 {
                return Err(Error::Schema(format!(
                    "row {}: missing y is only permitted when s = 0",
                    i + 1
                )));
            }
        }
        Ok(Dataset { z, s, y, a, w, c, latent })
    }

    /// Checks the outcome column against the pipeline's truncation mode:
    /// outside truncated mode every record must carry y.
    pub fn validate_outcomes(&self, truncated: bool) -> Result<()> {
        if !truncated {
            if let Some(i) = self.y.iter().position(|v| v.is_none()) {
                return Err(Error::Schema(format!(
                    "row {}: y is empty but the pipeline is not in truncated mode",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn c_dim(&self) -> usize {
        self.c.len()
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    pub fn s(&self) -> &[u8] {
        &self.s
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn c_col(&self, j: usize) -> &[f64] {
        &self.c[j]
    }

    pub fn y_opt(&self, i: usize) -> Option<f64> {
        self.y[i]
    }

    /// Outcome value with the truncation placeholder 0; callers must ensure
    /// truncated records never reach an estimator.
    pub fn y_or_zero(&self, i: usize) -> f64 {
        self.y[i].unwrap_or(0.0)
    }

    pub fn covariates(&self, i: usize) -> Covariates<'_> {
        // Covariates borrows the first C column contiguously only when the
        // block is one-dimensional; general access goes through c_buf.
        debug_assert_eq!(self.c.len(), 1, "use c_buf for multi-column baselines");
        Covariates { a: self.a[i], w: self.w[i], c: std::slice::from_ref(&self.c[0][i]) }
    }

    /// Copies record i's baseline covariates into `buf` and returns the view.
    pub fn covariates_buf<'b>(&self, i: usize, buf: &'b mut Vec<f64>) -> Covariates<'b> {
        buf.clear();
        for col in &self.c {
            buf.push(col[i]);
        }
        Covariates { a: self.a[i], w: self.w[i], c: buf }
    }

    pub fn latent(&self) -> Option<&LatentTruth> {
        self.latent.as_ref()
    }

    /// Case resample by record indices; latent truth is not carried over.
    pub fn resample(&self, indices: &[usize]) -> Dataset {
        let gather_f = |col: &[f64]| indices.iter().map(|&i| col[i]).collect::<Vec<_>>();
        Dataset {
            z: indices.iter().map(|&i| self.z[i]).collect(),
            s: indices.iter().map(|&i| self.s[i]).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            a: gather_f(&self.a),
            w: gather_f(&self.w),
            c: self.c.iter().map(|col| gather_f(col)).collect(),
            latent: None,
        }
    }

    fn c_header(&self) -> Vec<String> {
        (0..self.c.len())
            .map(|j| if j == 0 { "c".to_string() } else { format!("c{}", j + 1) })
            .collect()
    }

    /// Serializes to the CSV schema; `with_latent` appends u and g columns.
    pub fn to_csv(&self, with_latent: bool) -> Result<String> {
        let mut header: Vec<String> =
            ["z", "s", "y", "a", "w"].iter().map(|s| s.to_string()).collect();
        header.extend(self.c_header());
        let lat = if with_latent {
            let lat = self.latent.as_ref().ok_or_else(|| {
                Error::Schema("dataset carries no latent truth to export".into())
            })?;
            header.push("u".into());
            header.push("g".into());
            Some(lat)
        } else {
            None
        };
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str(&header.join(","));
        out.push('\n');
        let fmt = |v: f64| format!("{v:.16e}");
        for i in 0..self.len() {
            out.push_str(&format!("{},{},", self.z[i], self.s[i]));
            if let Some(y) = self.y[i] {
                out.push_str(&fmt(y));
            }
            out.push(',');
            out.push_str(&fmt(self.a[i]));
            out.push(',');
            out.push_str(&fmt(self.w[i]));
            for col in &self.c {
                out.push(',');
                out.push_str(&fmt(col[i]));
            }
            if let Some(lat) = lat {
                out.push(',');
                out.push_str(&fmt(lat.u[i]));
                out.push(',');
                out.push_str(lat.g[i].token());
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses the CSV schema; unknown columns are rejected, and latent u/g
    /// columns are picked up when both are present.
    pub fn from_csv_str(text: &str) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Schema(format!("header: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut col_of = std::collections::HashMap::new();
        for (j, h) in headers.iter().enumerate() {
            if col_of.insert(h.as_str().to_string(), j).is_some() {
                return Err(Error::Schema(format!("duplicate column `{h}`")));
            }
        }
        for required in ["z", "s", "a", "w", "c"] {
            if !col_of.contains_key(required) {
                return Err(Error::Schema(format!("missing required column `{required}`")));
            }
        }
        let mut c_names = vec!["c".to_string()];
        for k in 2.. {
            let name = format!("c{k}");
            if col_of.contains_key(&name) {
                c_names.push(name);
            } else {
                break;
            }
        }
        let has_latent = col_of.contains_key("u") || col_of.contains_key("g");
        if has_latent && !(col_of.contains_key("u") && col_of.contains_key("g")) {
            return Err(Error::Schema("latent columns u and g must appear together".into()));
        }
        let known: std::collections::HashSet<String> = ["z", "s", "y", "a", "w", "u", "g"]
            .iter()
            .map(|s| s.to_string())
            .chain(c_names.iter().cloned())
            .collect();
        for h in &headers {
            if !known.contains(h) {
                return Err(Error::Schema(format!("unknown column `{h}`")));
            }
        }

        let (mut z, mut s, mut y, mut a, mut w) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut c: Vec<Vec<f64>> = vec![Vec::new(); c_names.len()];
        let (mut lu, mut lg) = (Vec::new(), Vec::new());
        for (idx, record) in reader.records().enumerate() {
            let row = idx + 1;
            let record = record.map_err(|e| Error::Schema(format!("row {row}: {e}")))?;
            let field = |name: &str| -> Result<&str> {
                record
                    .get(col_of[name])
                    .ok_or_else(|| Error::Schema(format!("row {row}: missing field `{name}`")))
            };
            let parse_f = |name: &str| -> Result<f64> {
                let raw = field(name)?.trim();
                raw.parse::<f64>()
                    .map_err(|_| Error::Schema(format!("row {row}: `{name}` is not a number: `{raw}`")))
            };
            let parse_bit = |name: &str| -> Result<u8> {
                match field(name)?.trim() {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => {
                        Err(Error::Schema(format!("row {row}: `{name}` must be 0 or 1, got `{other}`")))
                    }
                }
            };
            z.push(parse_bit("z")?);
            s.push(parse_bit("s")?);
            let y_val = if let Some(&jy) = col_of.get("y") {
                let raw = record.get(jy).unwrap_or("").trim();
                if raw.is_empty() {
                    None
                } else {
                    Some(raw.parse::<f64>().map_err(|_| {
                        Error::Schema(format!("row {row}: `y` is not a number: `{raw}`"))
                    })?)
                }
            } else {
                None
            };
            y.push(y_val);
            a.push(parse_f("a")?);
            w.push(parse_f("w")?);
            for (j, name) in c_names.iter().enumerate() {
                c[j].push(parse_f(name)?);
            }
            if has_latent {
                lu.push(parse_f("u")?);
                lg.push(PrincipalStratum::from_token(field("g")?.trim()).map_err(|e| {
                    Error::Schema(format!("row {row}: {e}"))
                })?);
            }
        }
        let latent = has_latent.then(|| LatentTruth { u: lu, g: lg });
        Dataset::new(z, s, y, a, w, c, latent)
    }
}
