//! Loophole injectors and the detection-efficiency threshold search.

mod coincidence;
mod detection;
mod memory;
mod threshold;

pub use coincidence::{apply_coincidence, emit_events, CoincidenceConfig, CoincidenceResult, Event, Pairing};
pub use detection::{apply_detection, EfficiencyConfig};
pub use memory::{
    memory_adversary, CountSteering, Input, MemoryAutomaton, MemoryStrategy, Memoryless, SettingsPattern,
};
pub use threshold::{ch_violation, efficiency_threshold, max_violation, threshold_scan, Violation};
