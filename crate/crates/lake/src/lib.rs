//! Per-vertical data lake fed by platform notifications. Each vertical is
//! a tenant with its own write-ahead log; a shared intake journal keeps
//! every accepted notification so stores can be rebuilt by replay.

pub mod error;
pub mod http;
pub mod intake;
pub mod model;
pub mod store;

pub use error::{LakeError, Result};
pub use intake::{
    journal_entries, node_of, read_dead_letters, route_vertical, version_label, Ack, DeadLetterEntry,
    DescriptorResolver, JournalEntry, Lake, LakeConfig, LakeStats, Source, Tenancy, SHARED_TENANT,
};
pub use model::{DataRow, NodeDim, ParameterRow, TenantId, VersionDim};
pub use store::{Durability, TenantStore};
