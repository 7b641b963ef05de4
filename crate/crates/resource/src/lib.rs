//! Resource model of the monitoring platform: a CSE root with application
//! entities, bounded containers of content instances, access control
//! policies, groups and subscriptions.

pub mod acp;
pub mod clock;
pub mod descriptor;
pub mod error;
pub mod journal;
pub mod model;
pub mod payload;
pub mod tree;

pub use acp::{acop_decode, acop_encode, AccessPolicy, AccessRule, Permission, PermissionSet};
pub use clock::{Clock, ManualClock, SystemClock};
pub use descriptor::DescriptorRecord;
pub use error::{ResourceError, Result};
pub use model::*;
pub use payload::{parse_positional, parse_positional_payload, PayloadValue};
pub use tree::{CinEvent, CinListener, ResourceTree, TreeConfig};
