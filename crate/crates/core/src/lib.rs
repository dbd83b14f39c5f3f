//! Cultural indicators from honorific street names.
//!
//! The crate turns curated street datasets into decade and district metrics:
//! female and foreigner shares, the focus on historical decades (FHD),
//! occupation rankings and their stability, and choropleth map data. It
//! also carries the enrichment client that resolves honorees against a
//! SPARQL knowledge base, and the sampling workflow used to audit dataset
//! coverage against OpenStreetMap.
//!
//! ```
//! use streetonomics::model::decade_of;
//! assert_eq!(decade_of(1866).start_year(), 1860);
//! assert_eq!(decade_of(-5).start_year(), -10);
//! ```

pub mod country;
pub mod enrich;
mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod spatial;
pub mod text;
pub mod validate;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub struct $name;
        };
    }
    chapter!(Introduction, "introduction.md");
    chapter!(Records, "records.md");
    chapter!(Ingest, "ingest.md");
    chapter!(Enrichment, "enrichment.md");
    chapter!(Metrics, "metrics.md");
    chapter!(Occupations, "occupations.md");
    chapter!(Districts, "districts.md");
    chapter!(Validation, "validation.md");
    chapter!(Pipeline, "pipeline.md");
}
