//! Atomic-environment descriptors and external descriptor matrices.

pub mod external;
pub mod harmonics;
pub mod quadrature;
pub mod radial;
pub mod soap;

pub use external::{
    descriptors_to_csv, load_external_descriptors, parse_descriptor_csv, write_descriptors,
};
pub use soap::{
    aggregate_material, soap_atomic, soap_dataset, AtomicSoap, DescriptorSource,
    MaterialDescriptor, SoapCalculator, SoapConfig,
};
