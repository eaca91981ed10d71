//! Packet comment grammar: `<PACKET_LABEL> " - " <PHASE_LABEL>`, where the
//! phase label may be empty (`"BENIGN - "`).

use thiserror::Error;

use crate::anomaly::{LabelPair, PacketLabel};

pub const SEPARATOR: &str = " - ";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LabelError {
    #[error("label {0:?} lacks the \" - \" separator")]
    MissingSeparator(String),
    #[error("unknown packet label {0:?}")]
    UnknownLabel(String),
}

pub fn encode_label(l: &LabelPair) -> String {
    format!("{}{SEPARATOR}{}", l.packet.as_str(), l.phase)
}

pub fn parse_label(s: &str) -> Result<LabelPair, LabelError> {
    let (packet, phase) = s.split_once(SEPARATOR).ok_or_else(|| LabelError::MissingSeparator(s.to_string()))?;
    let packet: PacketLabel = packet.parse().map_err(|_| LabelError::UnknownLabel(packet.to_string()))?;
    Ok(LabelPair::new(packet, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grammar_examples() {
        assert_eq!(encode_label(&LabelPair::benign()), "BENIGN - ");
        assert_eq!(encode_label(&LabelPair::new(PacketLabel::BenignRecovered, "")), "BENIGN RECOVERED - ");
        assert_eq!(encode_label(&LabelPair::new(PacketLabel::Delayed, "delay_attack")), "DELAYED - delay_attack");
        assert_eq!(
            parse_label("INJECTED - inject_attack").unwrap(),
            LabelPair::new(PacketLabel::Injected, "inject_attack")
        );
        assert_eq!(parse_label("GARBAGE"), Err(LabelError::MissingSeparator("GARBAGE".into())));
        assert_eq!(parse_label("NOPE - x"), Err(LabelError::UnknownLabel("NOPE".into())));
    }

    proptest! {
        #[test]
        fn round_trip(i in 0usize..6, phase in "[a-z_+ -]{0,20}") {
            let l = LabelPair::new(PacketLabel::ALL[i], phase);
            prop_assert_eq!(parse_label(&encode_label(&l)).unwrap(), l);
        }
    }
}
