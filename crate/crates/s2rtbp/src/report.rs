use serde::{Deserialize, Serialize};

/// Outcome of a positivity scan over a sampled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub label: String,
    pub grid: String,
    pub samples: usize,
    pub min: f64,
    /// Coordinates of the minimiser, in the scan's own variables.
    pub argmin: Vec<f64>,
    /// Minimum minus the pass threshold.
    pub margin: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ScanReport {
    pub fn positivity(label: impl Into<String>, grid: impl Into<String>, samples: usize, min: Option<(f64, Vec<f64>)>) -> Self {
        let (min, argmin) = min.unwrap_or((f64::NAN, Vec::new()));
        Self {
            label: label.into(),
            grid: grid.into(),
            samples,
            min,
            argmin,
            margin: min,
            pass: samples > 0 && min > 0.0,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Sequential minimum with its payload. A NaN value wins so that it cannot
/// hide behind finite samples.
pub fn reduce_min<T>(items: impl IntoIterator<Item = (f64, T)>) -> Option<(f64, T)> {
    let mut best: Option<(f64, T)> = None;
    for (v, t) in items {
        if v.is_nan() {
            return Some((v, t));
        }
        match &best {
            Some((b, _)) if *b <= v => {}
            _ => best = Some((v, t)),
        }
    }
    best
}

pub fn reduce_max<T>(items: impl IntoIterator<Item = (f64, T)>) -> Option<(f64, T)> {
    reduce_min(items.into_iter().map(|(v, t)| (-v, t))).map(|(v, t)| (-v, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_is_not_masked() {
        let r = reduce_min([(1.0, 0), (f64::NAN, 1), (-3.0, 2)]);
        assert!(r.unwrap().0.is_nan());
    }

    #[test]
    fn ties_keep_first() {
        assert_eq!(reduce_min([(1.0, 'a'), (1.0, 'b')]).unwrap().1, 'a');
        assert_eq!(reduce_max([(2.0, 'a'), (2.0, 'b'), (0.0, 'c')]).unwrap().1, 'a');
    }
}
