//! Seeded synthetic classification data.
//!
//! A synthetic spec is a plain key-value text block, one `key = value` per
//! line, `#` starts a comment:
//!
//! ```text
//! kind    = blobs   # only kind so far
//! n       = 2000    # samples
//! classes = 10
//! dim     = 16      # features per sample
//! seed    = 7
//! noise   = 0.1     # per-feature Gaussian std
//! modes   = 1       # optional: clusters per class
//! ```
//!
//! Cluster centres are drawn uniformly from `[0.2, 0.8]^dim`; each sample is
//! its centre plus isotropic Gaussian noise, clamped to `[0, 1]`. Labels
//! cycle through the classes in sample order.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: String,
    pub n: usize,
    pub classes: usize,
    pub dim: usize,
    pub seed: u64,
    pub noise: f64,
    #[serde(default = "one")]
    pub modes: usize,
}

fn one() -> usize {
    1
}

impl SyntheticSpec {
    pub fn blobs(n: usize, classes: usize, dim: usize, noise: f64, seed: u64) -> Self {
        SyntheticSpec {
            kind: "blobs".into(),
            n,
            classes,
            dim,
            seed,
            noise,
            modes: 1,
        }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut fields = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(['=', ':'])
                .ok_or_else(|| err(i + 1, format!("expected key = value, got {line:?}")))?;
            fields.insert(key.trim().to_ascii_lowercase(), (i + 1, value.trim().to_string()));
        }
        let take = |key: &str| -> Result<(usize, String)> {
            fields
                .get(key)
                .cloned()
                .ok_or_else(|| err(0, format!("missing key {key:?}")))
        };
        fn num<T: std::str::FromStr>(
            (line, v): (usize, String),
            key: &str,
            err: &dyn Fn(usize, String) -> Error,
        ) -> Result<T> {
            v.parse()
                .map_err(|_| err(line, format!("{key}: cannot parse {v:?}")))
        }
        let spec = SyntheticSpec {
            kind: take("kind")?.1,
            n: num(take("n")?, "n", &err)?,
            classes: num(take("classes")?, "classes", &err)?,
            dim: num(take("dim")?, "dim", &err)?,
            seed: num(take("seed")?, "seed", &err)?,
            noise: num(take("noise")?, "noise", &err)?,
            modes: match fields.get("modes") {
                Some(v) => num(v.clone(), "modes", &err)?,
                None => 1,
            },
        };
        if let Some(unknown) = fields
            .keys()
            .find(|k| !["kind", "n", "classes", "dim", "seed", "noise", "modes"].contains(&k.as_str()))
        {
            return Err(err(fields[unknown].0, format!("unknown key {unknown:?}")));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        format!(
            "kind = {}\nn = {}\nclasses = {}\ndim = {}\nseed = {}\nnoise = {}\nmodes = {}\n",
            self.kind, self.n, self.classes, self.dim, self.seed, self.noise, self.modes
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != "blobs" {
            return Err(Error::Dataset(format!(
                "unknown synthetic kind {:?}",
                self.kind
            )));
        }
        if self.n == 0 || self.dim == 0 || self.modes == 0 {
            return Err(Error::Dataset("n, dim and modes must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Dataset(format!("class count {} < 2", self.classes)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Dataset(format!("noise {} must be >= 0", self.noise)));
        }
        Ok(())
    }

    fn centers(&self) -> Vec<Vec<f64>> {
        let mut rng = seed::rng_for(self.seed, &[seed::STREAM_CENTERS]);
        (0..self.classes * self.modes)
            .map(|_| (0..self.dim).map(|_| rng.random_range(0.2..0.8)).collect())
            .collect()
    }

    fn draw(&self, n: usize, stream: u64) -> Result<Dataset> {
        self.validate()?;
        let centers = self.centers();
        let mut rng = seed::rng_for(self.seed, &[seed::STREAM_SAMPLES, stream]);
        let mut samples = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % self.classes;
            let mode = if self.modes > 1 {
                rng.random_range(0..self.modes)
            } else {
                0
            };
            let center = &centers[class * self.modes + mode];
            for &c in center {
                let z: f64 = rng.sample(StandardNormal);
                samples.push((c + self.noise * z).clamp(0.0, 1.0) as f32);
            }
            labels.push(class as u32);
        }
        Dataset::new(
            samples,
            vec![self.dim],
            labels,
            self.classes,
            format!(
                "synthetic:{}:n={}:classes={}:dim={}:seed={}:noise={}:modes={}:stream={stream}",
                self.kind, n, self.classes, self.dim, self.seed, self.noise, self.modes
            ),
        )
    }

    pub fn generate(&self) -> Result<Dataset> {
        self.draw(self.n, 0)
    }

    /// Fresh samples from the same clusters, independent of [`generate`]
    /// and of every other `stream`.
    ///
    /// [`generate`]: SyntheticSpec::generate
    pub fn generate_holdout(&self, n: usize, stream: u64) -> Result<Dataset> {
        self.draw(n, stream.checked_add(1).expect("stream below u64::MAX"))
    }
}
