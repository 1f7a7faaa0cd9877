/// 63 scalp channels of a 64-channel 10-10 cap with the reference (Pz)
/// removed, in canonical order.
const STANDARD_63: [&str; 63] = [
    "Fp1", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7", "F5", "F3", "F1", "Fz", "F2", "F4", "F6", "F8", "FT9",
    "FT7", "FC5", "FC3", "FC1", "FC2", "FC4", "FC6", "FT8", "FT10", "T7", "C5", "C3", "C1", "Cz", "C2", "C4", "C6",
    "T8", "TP9", "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "TP8", "TP10", "P7", "P5", "P3", "P1", "P2",
    "P4", "P6", "P8", "PO7", "PO3", "POz", "PO4", "PO8", "O1", "Oz", "O2", "Iz",
];

/// The 16 channels ranked most important for FOG+ detection, most important first.
pub const PRESET_RANKED_16: [&str; 16] =
    ["TP9", "FT8", "Oz", "Fp1", "POz", "C1", "Iz", "T8", "FT10", "CP2", "FC6", "CP1", "F4", "C4", "P5", "CPz"];

pub fn standard_63() -> Vec<String> {
    STANDARD_63.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn montage_is_unique_and_contains_ranked_channels() {
        let set: HashSet<_> = STANDARD_63.iter().collect();
        assert_eq!(set.len(), 63);
        assert!(!set.contains(&"Pz"));
        for ch in PRESET_RANKED_16 {
            assert!(set.contains(&ch), "{ch}");
        }
    }
}
