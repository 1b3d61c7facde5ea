use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie_core::CMat;

use super::schedule::{ControlSchedule, Pulse};

pub const DEFAULT_DEPTH_LIMIT: usize = 6;

/// Bracket expression over control channels. Serialized with 1-based channel
/// numbers: `2` or `[2, [1, 2]]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "WordRepr", into = "WordRepr")]
pub enum BracketWord {
    Gen(usize),
    Bracket(Box<BracketWord>, Box<BracketWord>),
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum WordRepr {
    Gen(usize),
    Pair(Box<WordRepr>, Box<WordRepr>),
}

impl TryFrom<WordRepr> for BracketWord {
    type Error = String;

    fn try_from(r: WordRepr) -> std::result::Result<Self, String> {
        match r {
            WordRepr::Gen(0) => Err("channel numbers start at 1".into()),
            WordRepr::Gen(k) => Ok(BracketWord::Gen(k - 1)),
            WordRepr::Pair(a, b) => Ok(BracketWord::bracket((*a).try_into()?, (*b).try_into()?)),
        }
    }
}

impl From<BracketWord> for WordRepr {
    fn from(w: BracketWord) -> Self {
        match w {
            BracketWord::Gen(k) => WordRepr::Gen(k + 1),
            BracketWord::Bracket(a, b) => WordRepr::Pair(Box::new((*a).into()), Box::new((*b).into())),
        }
    }
}

impl BracketWord {
    pub fn bracket(a: BracketWord, b: BracketWord) -> Self {
        BracketWord::Bracket(Box::new(a), Box::new(b))
    }

    /// ad_a^k(b).
    pub fn ad_power(a: usize, k: usize, b: BracketWord) -> Self {
        (0..k).fold(b, |w, _| BracketWord::bracket(BracketWord::Gen(a), w))
    }

    /// Generators have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            BracketWord::Gen(_) => 1,
            BracketWord::Bracket(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Number of generator letters.
    pub fn length(&self) -> usize {
        match self {
            BracketWord::Gen(_) => 1,
            BracketWord::Bracket(a, b) => a.length() + b.length(),
        }
    }

    pub fn letters(&self) -> Vec<usize> {
        match self {
            BracketWord::Gen(k) => vec![*k],
            BracketWord::Bracket(a, b) => {
                let mut v = a.letters();
                v.extend(b.letters());
                v
            }
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        match self.letters().into_iter().find(|&k| k >= channels) {
            Some(k) => Err(Error::Spec(format!("bracket word uses channel {} of {channels}", k + 1))),
            None => Ok(()),
        }
    }

    /// Matrix value of the word for the given channel matrices.
    /// Pulses emitted by the nested commutator expansion at refinement m
    /// (saturating).
    pub fn pulse_count(&self, m: usize) -> usize {
        match self {
            BracketWord::Gen(_) => 1,
            BracketWord::Bracket(a, b) => {
                a.pulse_count(m).saturating_add(b.pulse_count(m)).saturating_mul(m.saturating_mul(2))
            }
        }
    }

    pub fn evaluate(&self, channels: &[CMat]) -> CMat {
        match self {
            BracketWord::Gen(k) => channels[*k].clone(),
            BracketWord::Bracket(a, b) => {
                let (x, y) = (a.evaluate(channels), b.evaluate(channels));
                &x * &y - &y * &x
            }
        }
    }

    pub fn render(&self) -> String {
        match self {
            BracketWord::Gen(k) => format!("u{}", k + 1),
            BracketWord::Bracket(a, b) => format!("[{}, {}]", a.render(), b.render()),
        }
    }
}

/// Pulse budget for one compiled schedule.
pub const MAX_PULSES: usize = 10_000_000;

/// Time-ordered pulses approximating exp(τ·word).
pub(crate) fn flow_pulses(word: &BracketWord, tau: f64, m: usize, out: &mut Vec<Pulse>) {
    if tau == 0.0 {
        return;
    }
    match word {
        BracketWord::Gen(k) => out.push(Pulse { channel: *k, amount: tau }),
        BracketWord::Bracket(a, b) => {
            let (a, b) = if tau > 0.0 { (a, b) } else { (b, a) };
            let s = (tau.abs() / m as f64).sqrt();
            for _ in 0..m {
                // exp(sA) exp(sB) exp(-sA) exp(-sB), rightmost factor first
                flow_pulses(b, -s, m, out);
                flow_pulses(a, -s, m, out);
                flow_pulses(b, s, m, out);
                flow_pulses(a, s, m, out);
            }
        }
    }
}

/// Piecewise-constant realization of exp(duration·word) by nested
/// group-commutator cycles.
pub fn compile_bracket_flow(word: &BracketWord, duration: f64, m: usize, channels: usize) -> Result<ControlSchedule> {
    compile_bracket_flow_with_limit(word, duration, m, channels, DEFAULT_DEPTH_LIMIT)
}

pub fn compile_bracket_flow_with_limit(
    word: &BracketWord,
    duration: f64,
    m: usize,
    channels: usize,
    depth_limit: usize,
) -> Result<ControlSchedule> {
    if word.depth() > depth_limit {
        return Err(Error::CompileDepth { depth: word.depth(), limit: depth_limit });
    }
    if m == 0 {
        return Err(Error::Spec("refinement m must be at least 1".into()));
    }
    if !duration.is_finite() {
        return Err(Error::Numeric("non-finite flow duration".into()));
    }
    word.validate(channels)?;
    let pulses = word.pulse_count(m);
    if pulses > MAX_PULSES {
        return Err(Error::CompileSize { pulses, limit: MAX_PULSES });
    }
    let mut pulses = Vec::with_capacity(pulses);
    flow_pulses(word, duration, m, &mut pulses);
    Ok(ControlSchedule::from_pulses(channels, &pulses))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_budget() {
        let mut w = BracketWord::Gen(0);
        for _ in 0..7 {
            w = BracketWord::bracket(BracketWord::Gen(1), w);
        }
        assert_eq!(w.depth(), 8);
        let s = compile_bracket_flow_with_limit(&w, 0.3, 1, 2, 8).unwrap();
        assert!(s.len() <= w.pulse_count(1));
        let e = compile_bracket_flow_with_limit(&w, 0.3, 64, 2, 8).unwrap_err();
        assert!(matches!(e, Error::CompileSize { .. }));
        assert_eq!(BracketWord::Gen(0).pulse_count(1000), 1);
    }

    #[test]
    fn serde_uses_one_based_channels() {
        let w = BracketWord::bracket(BracketWord::Gen(1), BracketWord::bracket(BracketWord::Gen(0), BracketWord::Gen(1)));
        let j = serde_json::to_string(&w).unwrap();
        assert_eq!(j, "[2,[1,2]]");
        let back: BracketWord = serde_json::from_str(&j).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<BracketWord>("0").is_err());
        assert_eq!(w.depth(), 3);
        assert_eq!(w.length(), 3);
    }

    #[test]
    fn trivial_compiles() {
        let g = BracketWord::Gen(0);
        assert!(compile_bracket_flow(&g, 0.0, 4, 2).unwrap().is_empty());
        let s = compile_bracket_flow(&g, 2.5, 4, 2).unwrap();
        assert_eq!(s.breakpoints, vec![0.0, 1.0]);
        assert_eq!(s.controls, vec![vec![2.5, 0.0]]);
        let s = compile_bracket_flow(&g, -1.5, 1, 2).unwrap();
        assert_eq!(s.controls, vec![vec![-1.5, 0.0]]);
    }

    #[test]
    fn commutator_cycle_structure() {
        let w = BracketWord::bracket(BracketWord::Gen(1), BracketWord::Gen(0));
        let s = compile_bracket_flow(&w, 0.04, 1, 2).unwrap();
        // time order: B(-s), A(-s), B(s), A(s) with A = channel 2, B = channel 1
        assert_eq!(s.controls, vec![vec![-0.2, 0.0], vec![0.0, -0.2], vec![0.2, 0.0], vec![0.0, 0.2]]);
        let s = compile_bracket_flow(&w, -0.04, 1, 2).unwrap();
        assert_eq!(s.controls[0], vec![0.0, -0.2]);
    }

    #[test]
    fn depth_limit_and_channels() {
        let mut w = BracketWord::Gen(0);
        for _ in 0..6 {
            w = BracketWord::bracket(BracketWord::Gen(1), w);
        }
        assert!(matches!(compile_bracket_flow(&w, 1.0, 1, 2), Err(Error::CompileDepth { depth: 7, limit: 6 })));
        assert!(compile_bracket_flow(&BracketWord::Gen(3), 1.0, 1, 2).is_err());
    }
}
