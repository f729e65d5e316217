//! Recorded chain output and its on-disk form.
//!
//! A trace is written as a JSON summary plus a little-endian binary file of
//! states: for each state a `u32` order `n` followed by `n + 1` `f64`
//! coefficients.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MoveKind, StepOutcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveTally {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveTally {
    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}

/// States kept after burn-in and thinning, with move statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    tau: f64,
    burn_in: usize,
    thinning: usize,
    offsets: Vec<usize>,
    coeffs: Vec<f64>,
    tallies: BTreeMap<MoveKind, MoveTally>,
    order_history: Vec<usize>,
}

impl ChainTrace {
    pub fn new(tau: f64, burn_in: usize, thinning: usize) -> Self {
        Self {
            tau,
            burn_in,
            thinning,
            offsets: vec![0],
            coeffs: Vec::new(),
            tallies: BTreeMap::new(),
            order_history: Vec::new(),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn thinning(&self) -> usize {
        self.thinning
    }

    /// Order after every iteration, burn-in included.
    pub fn record_order(&mut self, n: usize) {
        self.order_history.push(n);
    }

    pub fn order_history(&self) -> &[usize] {
        &self.order_history
    }

    pub fn tally(&mut self, outcome: StepOutcome) {
        let t = self.tallies.entry(outcome.kind).or_default();
        t.proposed += 1;
        t.accepted += u64::from(outcome.accepted);
    }

    pub fn tallies(&self) -> &BTreeMap<MoveKind, MoveTally> {
        &self.tallies
    }

    pub fn push_state(&mut self, coeffs: &[f64]) {
        self.coeffs.extend_from_slice(coeffs);
        self.offsets.push(self.coeffs.len());
    }

    /// Number of stored states.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.coeffs[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.offsets.windows(2).map(|w| &self.coeffs[w[0]..w[1]])
    }

    /// Order of each stored state.
    pub fn orders(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.offsets.windows(2).map(|w| w[1] - w[0] - 1)
    }

    /// Accepted over proposed, pooled across move types; 0 with no proposals.
    pub fn acceptance_rate(&self) -> f64 {
        let (p, a) = self
            .tallies
            .values()
            .fold((0, 0), |(p, a), t| (p + t.proposed, a + t.accepted));
        if p == 0 { 0.0 } else { a as f64 / p as f64 }
    }

    pub fn acceptance_rate_of(&self, kind: MoveKind) -> Option<f64> {
        self.tallies.get(&kind).and_then(MoveTally::rate)
    }
}

/// JSON summary of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub tau: f64,
    pub burn_in: usize,
    pub thinning: usize,
    /// Order of each stored state.
    pub orders: Vec<usize>,
    pub order_history: Vec<usize>,
    /// Keyed by move label ("H", "H+", "H-", "IMA", "peak").
    pub acceptance: BTreeMap<String, MoveTally>,
    /// Binary state file, relative to the JSON file's directory.
    pub states_file: Option<String>,
}

fn states_path(json: &Path) -> PathBuf {
    json.with_extension("states.bin")
}

/// Writes `json` and a sibling `<stem>.states.bin`.
pub fn write_trace(trace: &ChainTrace, json: &Path) -> Result<()> {
    let bin = states_path(json);
    {
        let f = File::create(&bin).map_err(|e| Error::io(&bin, e))?;
        let mut w = BufWriter::new(f);
        let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(&bin, e));
        for s in trace.states() {
            let n = u32::try_from(s.len() - 1).map_err(|_| Error::format(&bin, "order exceeds u32"))?;
            put(&n.to_le_bytes())?;
            for v in s {
                put(&v.to_le_bytes())?;
            }
        }
        w.flush().map_err(|e| Error::io(&bin, e))?;
    }
    let file = TraceFile {
        tau: trace.tau,
        burn_in: trace.burn_in,
        thinning: trace.thinning,
        orders: trace.orders().collect(),
        order_history: trace.order_history.clone(),
        acceptance: trace
            .tallies
            .iter()
            .map(|(k, t)| (k.label().to_string(), *t))
            .collect(),
        states_file: bin.file_name().map(|s| s.to_string_lossy().into_owned()),
    };
    let f = File::create(json).map_err(|e| Error::io(json, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &file).map_err(|e| Error::format(json, e.to_string()))
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace(json: &Path) -> Result<ChainTrace> {
    let f = File::open(json).map_err(|e| Error::io(json, e))?;
    let file: TraceFile =
        serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::format(json, e.to_string()))?;
    let mut trace = ChainTrace::new(file.tau, file.burn_in, file.thinning);
    trace.order_history = file.order_history;
    for (label, t) in file.acceptance {
        let kind = MoveKind::from_label(&label)
            .ok_or_else(|| Error::format(json, format!("unknown move label {label:?}")))?;
        trace.tallies.insert(kind, t);
    }
    let Some(name) = file.states_file else {
        if file.orders.is_empty() {
            return Ok(trace);
        }
        return Err(Error::format(json, "states listed but no state file given"));
    };
    let bin = json.parent().unwrap_or(Path::new(".")).join(name);
    let mut bytes = Vec::new();
    File::open(&bin)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(&bin, e))?;

    let mut rest = bytes.as_slice();
    let mut buf = Vec::new();
    for &expected in &file.orders {
        let n = u32::from_le_bytes(take::<4>(&mut rest, &bin)?) as usize;
        if n != expected {
            return Err(Error::format(&bin, format!("state order {n} disagrees with summary {expected}")));
        }
        buf.clear();
        for _ in 0..=n {
            buf.push(f64::from_le_bytes(take::<8>(&mut rest, &bin)?));
        }
        trace.push_state(&buf);
    }
    if !rest.is_empty() {
        return Err(Error::format(&bin, "trailing bytes in state file"));
    }
    Ok(trace)
}

fn take<const K: usize>(rest: &mut &[u8], path: &Path) -> Result<[u8; K]> {
    let Some((head, tail)) = rest.split_first_chunk::<K>() else {
        return Err(Error::format(path, "truncated state file"));
    };
    *rest = tail;
    Ok(*head)
}
