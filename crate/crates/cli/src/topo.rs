use cyclecoin::CycleTopology;
use hopnet::{gen_binary_search_cycle, gen_random_cycles, CycleSet};

use crate::PaylabError;

/// Topology generators for `gen-topology`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    /// K independent random cycles.
    Random,
    /// The binary-search cycle paired with its reverse.
    Binary,
    /// The ring 0..N.
    Ring,
}

impl std::str::FromStr for TopologyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(TopologyKind::Random),
            "binary" => Ok(TopologyKind::Binary),
            "ring" => Ok(TopologyKind::Ring),
            _ => Err(format!("unknown topology kind {s:?}; expected random, binary or ring")),
        }
    }
}

/// One cycle per line.
pub fn generate(kind: TopologyKind, n: usize, k: usize, seed: u64) -> Result<String, PaylabError> {
    if n < 3 {
        return Err(PaylabError::Config(format!("a cycle needs N ≥ 3, got {n}")));
    }
    let set = match kind {
        TopologyKind::Random => gen_random_cycles(n, k, seed)?,
        TopologyKind::Binary => {
            let c = gen_binary_search_cycle(n)?;
            let mut rev = c.order().to_vec();
            rev.reverse();
            CycleSet::new(vec![c, CycleTopology::new(rev)])?
        }
        TopologyKind::Ring => CycleSet::new(vec![CycleTopology::ring(n)])?,
    };
    Ok(set.to_text())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for kind in [TopologyKind::Random, TopologyKind::Binary, TopologyKind::Ring] {
            let text = generate(kind, 16, 3, 7).unwrap();
            let set = CycleSet::from_text(&text).unwrap();
            assert_eq!(set.n(), 16);
            assert_eq!(set.to_text(), text);
        }
    }
}
