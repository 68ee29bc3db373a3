//! Probability masses on nodes, scalar and vector-valued, and their CSV form.
//!
//! Density files hold one row per node. Scalar files have a single column;
//! vector-valued files start with a `channels=M` header line followed by rows
//! of `M` comma-separated values. Lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit total mass.
pub const MASS_TOL: f64 = 1e-12;

/// Mixing weight used by [`mix_with_uniform`] when none is chosen.
pub const DEFAULT_MIXING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassDistribution {
    values: Vec<f64>,
}

impl MassDistribution {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate(&values)?;
        Ok(MassDistribution { values })
    }

    /// Scales nonnegative weights to unit total.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        Self::new(normalize(weights)?)
    }

    pub fn uniform(n: usize) -> Self {
        MassDistribution {
            values: vec![1.0 / n as f64; n],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A vector-valued mass: `channels` node functions with a joint unit total.
/// Entry `(channel, node)` lives at `channel * nodes + node`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorMass {
    channels: usize,
    nodes: usize,
    values: Vec<f64>,
}

impl VectorMass {
    pub fn new(channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || !values.len().is_multiple_of(channels) {
            return Err(Error::InvalidMass(format!(
                "{} values do not split into {channels} channels",
                values.len()
            )));
        }
        validate(&values)?;
        Ok(VectorMass {
            channels,
            nodes: values.len() / channels,
            values,
        })
    }

    pub fn from_channels(channels: &[Vec<f64>]) -> Result<Self> {
        let values: Vec<f64> = channels.iter().flatten().copied().collect();
        if channels.iter().any(|c| c.len() != channels[0].len()) {
            return Err(Error::InvalidMass("channels have different lengths".into()));
        }
        Self::new(channels.len(), values)
    }

    /// Scales nonnegative channel weights to a joint unit total.
    pub fn from_weights(channels: usize, weights: &[f64]) -> Result<Self> {
        Self::new(channels, normalize(weights)?)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.nodes..(c + 1) * self.nodes]
    }

    pub fn channel_mass(&self, c: usize) -> f64 {
        self.channel(c).iter().sum()
    }
}

/// `(1 - eps) rho + eps * uniform`, which moves boundary marginals into
/// the interior of the simplex. The uniform part spreads over all entries,
/// so vector masses are mixed jointly. Total mass is preserved.
pub fn mix_with_uniform(values: &[f64], eps: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("mixing weight {eps} outside [0, 1]")));
    }
    if values.is_empty() {
        return Err(Error::InvalidMass("empty distribution".into()));
    }
    let total: f64 = values.iter().sum();
    let share = eps * total / values.len() as f64;
    Ok(values.iter().map(|v| (1.0 - eps) * v + share).collect())
}

fn validate(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidMass("empty distribution".into()));
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidMass(format!("entry {i} = {v} is negative or not finite")));
    }
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidMass(format!("total mass {total} != 1")));
    }
    Ok(())
}

fn normalize(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidMass("weights must be nonnegative and finite".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidMass("weights sum to zero".into()));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Raw contents of a density file: node-major rows of `channels` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub channels: usize,
    pub rows: Vec<Vec<f64>>,
}

impl DensityTable {
    /// Values in composite (channel-major) order.
    pub fn composite(&self) -> Vec<f64> {
        let n = self.rows.len();
        let mut out = vec![0.0; n * self.channels];
        for (i, row) in self.rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                out[c * n + i] = *v;
            }
        }
        out
    }

    pub fn from_composite(channels: usize, values: &[f64]) -> Self {
        let n = values.len() / channels;
        let rows = (0..n)
            .map(|i| (0..channels).map(|c| values[c * n + i]).collect())
            .collect();
        DensityTable { channels, rows }
    }

    pub fn to_scalar(&self) -> Result<MassDistribution> {
        if self.channels != 1 {
            return Err(Error::InvalidMass(format!(
                "expected a scalar density, found {} channels",
                self.channels
            )));
        }
        MassDistribution::new(self.composite())
    }

    pub fn to_vector(&self) -> Result<VectorMass> {
        VectorMass::new(self.channels, self.composite())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.channels != 1 {
            out.push_str(&format!("channels={}\n", self.channels));
        }
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut channels = None;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(m) = line.strip_prefix("channels=") {
                if channels.is_some() || !rows.is_empty() {
                    return Err((lineno + 1, "channel header must come first".into()));
                }
                let m = m
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| (lineno + 1, format!("bad channel count: {e}")))?;
                if m == 0 {
                    return Err((lineno + 1, "channel count must be positive".into()));
                }
                channels = Some(m);
                continue;
            }
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| (lineno + 1, format!("bad value: {e}")))?;
            let expected = *channels.get_or_insert(1);
            if row.len() != expected {
                return Err((lineno + 1, format!("expected {expected} columns, got {}", row.len())));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err((0, "no density rows".into()));
        }
        Ok(DensityTable {
            channels: channels.unwrap_or(1),
            rows,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|(line, msg)| Error::parse(path, line, msg))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_keeps_mass_and_lifts_zeros() {
        let m = mix_with_uniform(&[1.0, 0.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(m, vec![0.625, 0.125, 0.125, 0.125]);
        let tiny = mix_with_uniform(&[0.5, 0.5, 0.0], DEFAULT_MIXING).unwrap();
        assert!(tiny[2] > 0.0);
        assert!((tiny.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(mix_with_uniform(&[1.0], 1.5).is_err());
    }

    #[test]
    fn validation() {
        assert!(MassDistribution::new(vec![0.9, 0.1]).is_ok());
        assert!(MassDistribution::new(vec![0.9, 0.2]).is_err());
        assert!(MassDistribution::new(vec![1.1, -0.1]).is_err());
        assert!(MassDistribution::new(vec![]).is_err());
        let m = MassDistribution::from_weights(&[1.0, 3.0]).unwrap();
        assert_eq!(m.values(), &[0.25, 0.75]);
    }

    #[test]
    fn vector_mass_layout() {
        let v = VectorMass::from_channels(&[vec![0.25, 0.25], vec![0.5, 0.0]]).unwrap();
        assert_eq!(v.nodes(), 2);
        assert_eq!(v.channel(1), &[0.5, 0.0]);
        assert_eq!(v.channel_mass(0), 0.5);
        assert!(VectorMass::new(3, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let table = DensityTable::from_composite(2, &[0.1, 0.2, 0.3, 1.0 / 7.0, 0.0, 0.4 - 1.0 / 7.0]);
        let parsed = DensityTable::parse(&table.to_csv()).unwrap();
        assert_eq!(parsed, table);
        assert_eq!(parsed.composite(), table.composite());

        let scalar = DensityTable::parse("# mu\n0.9\n0.1\n").unwrap();
        assert_eq!(scalar.channels, 1);
        assert_eq!(scalar.to_scalar().unwrap().values(), &[0.9, 0.1]);
        assert!(DensityTable::parse("channels=2\n0.5\n").is_err());
        assert!(DensityTable::parse("").is_err());
    }
}
