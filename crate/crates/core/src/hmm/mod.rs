//! Discrete hidden Markov models `(A, B, T, N, M)`: likelihood, decoding,
//! Baum-Welch training, one-symbol-per-state process discovery and graph
//! export.

#![allow(clippy::needless_range_loop)]

use serde::{Deserialize, Deserializer, Serialize, Serializer};

mod graph;
mod process;
mod train;

pub use graph::{export_hmm_graph, HmmEdge, HmmGraph, HmmNode, SymbolProbability};
pub use process::{
    fit_process_model, sequences_from_corpus, EventSequence, EventSequences, SymbolMap, SymbolSource, UnmappedPolicy,
};
pub use train::{baum_welch, BaumWelchOptions, HmmInit};

pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;
pub const CHECKPOINT_FORMAT: &str = "hmm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum HmmError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("symbol {symbol} at position {position} is outside 0..{m}")]
    Symbol { symbol: usize, position: usize, m: usize },
    #[error("no non-empty training sequences")]
    NoData,
    #[error("threshold {0} is outside [0, 1]")]
    Threshold(f64),
    #[error("document {0} has no timestamp")]
    MissingTimestamp(String),
    #[error("entity rule {rule}: document {document} has no key")]
    MissingKey { rule: String, document: String },
    #[error("document {document}: no symbol for {value:?}")]
    Unmapped { document: String, value: String },
    #[error("attribute evaluation failed: {0}")]
    Eval(#[from] crate::ontology::EvalError),
    #[error("attribute symbols need an ontology and an index")]
    NoEvaluator,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unknown graph format {0:?}")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    /// Hidden states.
    pub n: usize,
    /// Observation symbols.
    pub m: usize,
    /// N×N transitions.
    pub a: Vec<Vec<f64>>,
    /// N×M emissions.
    pub b: Vec<Vec<f64>>,
    /// Initial state distribution.
    pub t: Vec<f64>,
    pub symbol_names: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Log-likelihood per Baum-Welch iteration.
    #[serde(default, serialize_with = "ser_logs", deserialize_with = "de_logs")]
    pub trace: Vec<f64>,
    /// States whose A row is the uniform convention for never-exited states.
    #[serde(default)]
    pub uniform_rows: Vec<usize>,
}

// JSON has no infinities; -inf travels as null.
fn ser_logs<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
    opt.serialize(s)
}

fn de_logs<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    let opt: Vec<Option<f64>> = Vec::deserialize(d)?;
    Ok(opt.into_iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect())
}

fn default_names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("s{i}")).collect()
}

fn check_distribution(what: &str, row: &[f64], len: usize) -> Result<(), HmmError> {
    if row.len() != len {
        return Err(HmmError::Invalid(format!("{what} has {} entries, expected {len}", row.len())));
    }
    if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
        return Err(HmmError::Invalid(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(HmmError::Invalid(format!("{what} sums to {sum}")));
    }
    Ok(())
}

impl HmmModel {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, t: Vec<f64>) -> Result<Self, HmmError> {
        let n = t.len();
        let m = b.first().map_or(0, Vec::len);
        let model = HmmModel {
            n,
            m,
            a,
            b,
            t,
            symbol_names: default_names(m),
            seed: None,
            trace: Vec::new(),
            uniform_rows: Vec::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_symbol_names(mut self, names: Vec<String>) -> Result<Self, HmmError> {
        if names.len() != self.m {
            return Err(HmmError::Invalid(format!("{} symbol names for M = {}", names.len(), self.m)));
        }
        self.symbol_names = names;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), HmmError> {
        if self.n == 0 || self.m == 0 {
            return Err(HmmError::Invalid("N and M must be at least 1".into()));
        }
        if self.a.len() != self.n || self.b.len() != self.n {
            return Err(HmmError::Invalid("A and B need N rows".into()));
        }
        check_distribution("T", &self.t, self.n)?;
        for (i, row) in self.a.iter().enumerate() {
            check_distribution(&format!("A row {i}"), row, self.n)?;
        }
        for (i, row) in self.b.iter().enumerate() {
            check_distribution(&format!("B row {i}"), row, self.m)?;
        }
        if self.symbol_names.len() != self.m {
            return Err(HmmError::Invalid("symbol_names must have M entries".into()));
        }
        if self.uniform_rows.iter().any(|&s| s >= self.n) {
            return Err(HmmError::Invalid("uniform row flag out of range".into()));
        }
        Ok(())
    }

    pub fn check_sequence(&self, seq: &[usize]) -> Result<(), HmmError> {
        match seq.iter().position(|&o| o >= self.m) {
            Some(position) => Err(HmmError::Symbol {
                symbol: seq[position],
                position,
                m: self.m,
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn log_params(&self) -> LogParams {
        let ln = |rows: &Vec<Vec<f64>>| rows.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect();
        LogParams {
            a: ln(&self.a),
            b: ln(&self.b),
            t: self.t.iter().map(|p| p.ln()).collect(),
        }
    }

    pub fn to_checkpoint(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            format: &'a str,
            version: u32,
            model: &'a HmmModel,
        }
        serde_json::to_string_pretty(&Out {
            format: CHECKPOINT_FORMAT,
            version: CHECKPOINT_VERSION,
            model: self,
        })
        .expect("model serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, HmmError> {
        #[derive(Deserialize)]
        struct In {
            format: String,
            version: u32,
            model: HmmModel,
        }
        let cp: In = serde_json::from_str(text).map_err(|e| HmmError::Checkpoint(e.to_string()))?;
        if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
            return Err(HmmError::Checkpoint(format!("unsupported checkpoint {} v{}", cp.format, cp.version)));
        }
        cp.model.validate()?;
        Ok(cp.model)
    }
}

pub(crate) struct LogParams {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub t: Vec<f64>,
}

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log forward variables, one row per time step.
pub(crate) fn forward_table(lp: &LogParams, seq: &[usize]) -> Vec<Vec<f64>> {
    let n = lp.t.len();
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(seq.len());
    for (k, &o) in seq.iter().enumerate() {
        let row = (0..n)
            .map(|j| {
                let prior = if k == 0 {
                    lp.t[j]
                } else {
                    let prev = &alpha[k - 1];
                    log_sum_exp((0..n).map(|i| prev[i] + lp.a[i][j]))
                };
                prior + lp.b[j][o]
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

/// Log backward variables.
pub(crate) fn backward_table(lp: &LogParams, seq: &[usize]) -> Vec<Vec<f64>> {
    let n = lp.t.len();
    let len = seq.len();
    let mut beta = vec![vec![0.0; n]; len];
    for k in (0..len.saturating_sub(1)).rev() {
        let o = seq[k + 1];
        for i in 0..n {
            beta[k][i] = log_sum_exp((0..n).map(|j| lp.a[i][j] + lp.b[j][o] + beta[k + 1][j]));
        }
    }
    beta
}

/// `ln P(seq | model)`; 0 for the empty sequence and `-inf` for an
/// impossible one.
pub fn forward_likelihood(model: &HmmModel, seq: &[usize]) -> Result<f64, HmmError> {
    model.check_sequence(seq)?;
    if seq.is_empty() {
        return Ok(0.0);
    }
    let alpha = forward_table(&model.log_params(), seq);
    Ok(log_sum_exp(alpha[seq.len() - 1].iter().copied()))
}

/// Most probable state path and its log probability. At every step ties go
/// to the lowest state index.
pub fn viterbi(model: &HmmModel, seq: &[usize]) -> Result<(Vec<usize>, f64), HmmError> {
    model.check_sequence(seq)?;
    if seq.is_empty() {
        return Ok((Vec::new(), 0.0));
    }
    let lp = model.log_params();
    let n = model.n;
    let mut delta: Vec<f64> = (0..n).map(|j| lp.t[j] + lp.b[j][seq[0]]).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(seq.len());
    for &o in &seq[1..] {
        let mut next = vec![f64::NEG_INFINITY; n];
        let mut ptr = vec![0; n];
        for j in 0..n {
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            for i in 0..n {
                let v = delta[i] + lp.a[i][j];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + lp.b[j][o];
            ptr[j] = arg;
        }
        back.push(ptr);
        delta = next;
    }
    let (mut state, mut best) = (0, f64::NEG_INFINITY);
    for (j, &v) in delta.iter().enumerate() {
        if v > best {
            best = v;
            state = j;
        }
    }
    let mut path = vec![state; seq.len()];
    for k in (0..back.len()).rev() {
        state = back[k][state];
        path[k] = state;
    }
    Ok((path, best))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> HmmModel {
        HmmModel::new(
            vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![0.6, 0.4],
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(HmmModel::new(vec![vec![0.5, 0.4]], vec![vec![1.0]], vec![1.0]).is_err());
        assert!(HmmModel::new(vec![vec![1.0]], vec![vec![1.0]], vec![0.9]).is_err());
        assert!(HmmModel::new(vec![vec![1.0]], vec![vec![-0.5, 1.5]], vec![1.0]).is_err());
        assert!(small().with_symbol_names(vec!["x".into()]).is_err());
    }

    #[test]
    fn degenerate_model_has_zero_log_likelihood() {
        let m = HmmModel::new(vec![vec![1.0]], vec![vec![1.0]], vec![1.0]).unwrap();
        for len in 0..6 {
            assert_eq!(forward_likelihood(&m, &vec![0; len]).unwrap(), 0.0);
        }
    }

    #[test]
    fn hand_computed_forward() {
        // P([0,1]) = sum over paths
        let m = small();
        let p: f64 = 0.6 * 0.9 * (0.7 * 0.1 + 0.3 * 0.8) + 0.4 * 0.2 * (0.4 * 0.1 + 0.6 * 0.8);
        assert!((forward_likelihood(&m, &[0, 1]).unwrap() - p.ln()).abs() < 1e-12);
        assert!(forward_likelihood(&m, &[2]).is_err());
    }

    #[test]
    fn impossible_symbol_is_negative_infinity() {
        let m = HmmModel::new(vec![vec![1.0]], vec![vec![1.0, 0.0]], vec![1.0]).unwrap();
        assert_eq!(forward_likelihood(&m, &[0, 1]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn viterbi_cases() {
        let chain = HmmModel::new(
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
            vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let (path, lp) = viterbi(&chain, &[2, 0, 1, 2]).unwrap();
        assert_eq!(path, [0, 1, 2, 0]);
        assert_eq!(lp, 0.0);
        assert_eq!(viterbi(&chain, &[]).unwrap(), (vec![], 0.0));

        let tie = HmmModel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![vec![1.0], vec![1.0]], vec![0.5, 0.5])
            .unwrap();
        assert_eq!(viterbi(&tie, &[0, 0, 0]).unwrap().0, [0, 0, 0]);
        let m = small();
        assert!(viterbi(&m, &[0, 1, 1]).unwrap().1 <= forward_likelihood(&m, &[0, 1, 1]).unwrap());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut m = small();
        m.trace = vec![f64::NEG_INFINITY, -3.5];
        m.seed = Some(4);
        let back = HmmModel::from_checkpoint(&m.to_checkpoint()).unwrap();
        assert_eq!(back, m);
        assert!(HmmModel::from_checkpoint("{\"format\":\"x\",\"version\":1}").is_err());
    }
}
