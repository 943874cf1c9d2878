use super::HarnessError;

/// Trailing window of the plotted moving average.
pub const MOVING_AVERAGE_WINDOW: usize = 50;

/// Trailing mean over `window` values; the first `window - 1` entries
/// average the shorter prefix available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "moving-average window must be positive");
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Per-episode CTR of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct CtrSeries {
    pub seed: u64,
    pub values: Vec<f64>,
    pub moving_average: Vec<f64>,
}

impl CtrSeries {
    pub fn new(seed: u64, values: Vec<f64>) -> Self {
        let moving_average = moving_average(&values, MOVING_AVERAGE_WINDOW);
        Self {
            seed,
            values,
            moving_average,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-episode mean and population standard deviation across runs.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateSeries {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub runs: usize,
}

impl AggregateSeries {
    pub fn from_runs(runs: &[CtrSeries]) -> Result<Self, HarnessError> {
        let Some(first) = runs.first() else {
            return Err(HarnessError::Config("no runs to aggregate".into()));
        };
        let len = first.len();
        if let Some(bad) = runs.iter().find(|r| r.len() != len) {
            return Err(HarnessError::LengthMismatch(len, bad.len()));
        }
        let n = runs.len() as f64;
        let mut mean = vec![0.0; len];
        let mut std = vec![0.0; len];
        for e in 0..len {
            let m = runs.iter().map(|r| r.values[e]).sum::<f64>() / n;
            let var = runs.iter().map(|r| (r.values[e] - m).powi(2)).sum::<f64>() / n;
            mean[e] = m;
            std[e] = var.sqrt();
        }
        Ok(Self {
            mean,
            std,
            runs: runs.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Number of trailing episodes summarized by [`final_score`]: ⌈10%⌉, at
/// least 10, never more than the series.
pub fn tail_len(episodes: usize) -> usize {
    episodes.div_ceil(10).max(10).min(episodes)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinalScore {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation of the mean curve over its tail.
pub fn final_score(series: &AggregateSeries) -> FinalScore {
    assert!(!series.is_empty(), "final score of an empty series");
    let tail = &series.mean[series.len() - tail_len(series.len())..];
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    let std = (tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    FinalScore { mean, std }
}

/// Quotient of two final scores. A zero denominator gives an infinite value
/// with `denominator_zero` set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub denominator_zero: bool,
}

pub fn compare_ratio(a: &AggregateSeries, b: &AggregateSeries) -> Result<Ratio, HarnessError> {
    if a.len() != b.len() {
        return Err(HarnessError::LengthMismatch(a.len(), b.len()));
    }
    let (num, den) = (final_score(a).mean, final_score(b).mean);
    Ok(if den == 0.0 {
        Ratio {
            value: f64::INFINITY,
            denominator_zero: true,
        }
    } else {
        Ratio {
            value: num / den,
            denominator_zero: false,
        }
    })
}
