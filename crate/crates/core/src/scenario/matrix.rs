//! Communication-matrix import: one tunneled stream per row.

use serde::Deserialize;
use thiserror::Error;

use super::model::{Cycle, MatrixRef, RecoveryPoint, StreamSpec, Transport};
use crate::net::{FCS_LEN, MIN_FRAME};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix row {row}: {source}")]
    Csv { row: usize, source: csv::Error },
    #[error("matrix row {row}: {msg}")]
    Row { row: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct MatrixRow {
    pub stream_id: String,
    pub source: String,
    /// `|`-separated node names or patterns.
    pub destinations: String,
    pub cycle_ns: u64,
    pub payload_bytes: u32,
}

pub type MatrixSpec = MatrixRef;

/// VLAN-tagged Ethernet header, IPv4 and UDP.
const TUNNEL_HEADERS: u32 = 18 + 20 + 8;

pub fn parse_matrix(text: &str) -> Result<Vec<MatrixRow>, MatrixError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rd.deserialize::<MatrixRow>().enumerate() {
        let row = i + 2;
        let r = rec.map_err(|source| MatrixError::Csv { row, source })?;
        if r.cycle_ns == 0 {
            return Err(MatrixError::Row { row, msg: "cycle_ns must be positive".into() });
        }
        if r.destinations.trim().is_empty() {
            return Err(MatrixError::Row { row, msg: "no destinations".into() });
        }
        rows.push(r);
    }
    Ok(rows)
}

impl MatrixRef {
    pub fn expand(&self, rows: &[MatrixRow]) -> Result<Vec<StreamSpec>, MatrixError> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                let port = u16::try_from(usize::from(self.dest_port_base) + i).map_err(|_| MatrixError::Row {
                    row: i + 2,
                    msg: "UDP port range exhausted".into(),
                })?;
                let frame = (TUNNEL_HEADERS + r.payload_bytes + FCS_LEN as u32).max(MIN_FRAME as u32);
                Ok(StreamSpec {
                    id: r.stream_id.clone(),
                    pcp: self.pcp,
                    source: r.source.clone(),
                    destinations: r.destinations.split('|').map(|d| d.trim().to_string()).collect(),
                    frame_size: frame,
                    cycle: Cycle::Fixed(r.cycle_ns),
                    start_offset_ns: 0,
                    shaping_class: self.shaping_class,
                    redundant: false,
                    recovery: RecoveryPoint::Listener,
                    transport: Transport::UdpTunnel { dest_port: port },
                    payload_bytes: Some(r.payload_bytes),
                    vlan: self.vlan,
                })
            })
            .collect()
    }
}
