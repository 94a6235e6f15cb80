//! RFC ingestion: section segmentation and mandatory-property extraction.

mod document;
mod properties;

pub use document::{normalize_whitespace, parse_rfc, strip_page_furniture, RfcDocument, RfcSection};
pub use properties::{
    extract_all, extract_properties, has_mandatory_keyword, locate_excerpt, property_id, DocumentMeta, ExtractOptions,
    Modality, PropertiesFile, SectionExtraction, SectionRecord, SectionStatus, SemanticProperty, PROPERTIES_VERSION,
};
