use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::AnomalyKind;
use crate::Nanos;

/// One anomaly action. Eliminated packets only ever show up here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub true_time_ns: Nanos,
    pub anomaly_id: String,
    pub kind: AnomalyKind,
    pub stream_id: String,
    pub seq: u64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyLedger {
    pub entries: Vec<LedgerEntry>,
}

pub const LEDGER_HEADER: &str = "true_time_ns,anomaly_id,kind,stream_id,seq,action_detail";

impl AnomalyLedger {
    pub fn push(&mut self, e: LedgerEntry) {
        self.entries.push(e);
    }

    pub fn count(&self, anomaly_id: &str, kind: AnomalyKind) -> usize {
        self.entries.iter().filter(|e| e.anomaly_id == anomaly_id && e.kind == kind).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{LEDGER_HEADER}")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{},{},{}", e.true_time_ns, e.anomaly_id, e.kind, e.stream_id, e.seq, e.detail)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> io::Result<AnomalyLedger> {
        let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
        let mut entries = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line != LEDGER_HEADER {
                    return Err(bad(format!("unexpected ledger header {line:?}")));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.splitn(6, ',').collect();
            if f.len() != 6 {
                return Err(bad(format!("line {}: expected 6 fields", i + 1)));
            }
            let kind = serde_json::from_value(serde_json::Value::String(f[2].to_string()))
                .map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
            entries.push(LedgerEntry {
                true_time_ns: f[0].parse().map_err(|e| bad(format!("line {}: {e}", i + 1)))?,
                anomaly_id: f[1].to_string(),
                kind,
                stream_id: f[3].to_string(),
                seq: f[4].parse().map_err(|e| bad(format!("line {}: {e}", i + 1)))?,
                detail: f[5].to_string(),
            });
        }
        Ok(AnomalyLedger { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut l = AnomalyLedger::default();
        l.push(LedgerEntry {
            true_time_ns: 5,
            anomaly_id: "elim".into(),
            kind: AnomalyKind::Eliminate,
            stream_id: "auto_brake".into(),
            seq: 9,
            detail: "dropped at switchRearRight.eth1".into(),
        });
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let back = AnomalyLedger::read_csv(&buf[..]).unwrap();
        assert_eq!(back, l);
        assert_eq!(back.count("elim", AnomalyKind::Eliminate), 1);
    }
}
