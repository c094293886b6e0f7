//! Extraction records, their JSON wire format, extractor implementations and
//! fault injection.

mod extractor;
mod fault;
mod record;

pub use extractor::{ExtractError, Extractor, FaultInjectingExtractor, LiveExtractor, ScriptedExtractor, Task};
pub use fault::{inject_fault, DetectionLevel, FaultKind, InapplicableFault};
pub use record::{
    parse_record, serialize_record, ExtractionRecord, ObjectEntry, RecordKey, RelationEntry, WireError,
};
