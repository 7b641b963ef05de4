//! Access control policies.
//!
//! Each rule pairs an originator credential (`username:password`, compared
//! byte-wise) with an operation bitmask. Bit positions are fixed:
//!
//! | bit | value | operation |
//! |-----|-------|-----------|
//! | 0   | 1     | CREATE    |
//! | 1   | 2     | RETRIEVE  |
//! | 2   | 4     | UPDATE    |
//! | 3   | 8     | DELETE    |
//! | 4   | 16    | NOTIFY    |
//! | 5   | 32    | DISCOVERY |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ResourceError;

/// Largest valid operation mask (all six bits set).
pub const ACOP_MAX: u8 = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Permission {
    Create,
    Retrieve,
    Update,
    Delete,
    Notify,
    Discovery,
}

impl Permission {
    pub const ALL: [Permission; 6] = [
        Permission::Create,
        Permission::Retrieve,
        Permission::Update,
        Permission::Delete,
        Permission::Notify,
        Permission::Discovery,
    ];

    pub const fn bit(self) -> u8 {
        match self {
            Permission::Create => 1,
            Permission::Retrieve => 2,
            Permission::Update => 4,
            Permission::Delete => 8,
            Permission::Notify => 16,
            Permission::Discovery => 32,
        }
    }
}

impl fmt::Display for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Permission::Create => "CREATE",
            Permission::Retrieve => "RETRIEVE",
            Permission::Update => "UPDATE",
            Permission::Delete => "DELETE",
            Permission::Notify => "NOTIFY",
            Permission::Discovery => "DISCOVERY",
        };
        f.write_str(s)
    }
}

/// A set of permissions, stored as its operation mask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PermissionSet(u8);

impl PermissionSet {
    pub const EMPTY: PermissionSet = PermissionSet(0);
    pub const ALL: PermissionSet = PermissionSet(ACOP_MAX);

    pub fn contains(self, p: Permission) -> bool {
        self.0 & p.bit() != 0
    }

    pub fn insert(&mut self, p: Permission) {
        self.0 |= p.bit();
    }

    pub fn iter(self) -> impl Iterator<Item = Permission> {
        Permission::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn mask(self) -> u8 {
        self.0
    }
}

impl FromIterator<Permission> for PermissionSet {
    fn from_iter<I: IntoIterator<Item = Permission>>(iter: I) -> Self {
        let mut set = PermissionSet::EMPTY;
        for p in iter {
            set.insert(p);
        }
        set
    }
}

impl TryFrom<u8> for PermissionSet {
    type Error = ResourceError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        acop_decode(i64::from(value))
    }
}

impl From<PermissionSet> for u8 {
    fn from(value: PermissionSet) -> Self {
        value.0
    }
}

/// Sum of the bit values of the given permissions.
pub fn acop_encode<I: IntoIterator<Item = Permission>>(perms: I) -> u8 {
    perms.into_iter().collect::<PermissionSet>().mask()
}

/// Exact bit expansion of an operation mask.
pub fn acop_decode(acop: i64) -> Result<PermissionSet, ResourceError> {
    if !(0..=i64::from(ACOP_MAX)).contains(&acop) {
        return Err(ResourceError::InvalidAcop(acop));
    }
    Ok(PermissionSet(acop as u8))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRule {
    pub originator: String,
    pub acop: PermissionSet,
}

impl AccessRule {
    pub fn new(originator: impl Into<String>, acop: PermissionSet) -> Self {
        Self {
            originator: originator.into(),
            acop,
        }
    }
}

/// Rules (`pv`) control access to the resources the policy is attached to;
/// self rules (`pvs`) control access to the policy itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessPolicy {
    pub rules: Vec<AccessRule>,
    pub self_rules: Vec<AccessRule>,
}

impl AccessPolicy {
    pub fn new(rules: Vec<AccessRule>, self_rules: Vec<AccessRule>) -> Result<Self, ResourceError> {
        if rules.is_empty() {
            return Err(ResourceError::BadRequest(
                "access control policy needs at least one rule".into(),
            ));
        }
        Ok(Self { rules, self_rules })
    }

    pub fn grants(&self, originator: &str, op: Permission) -> bool {
        grants(&self.rules, originator, op)
    }

    pub fn grants_self(&self, originator: &str, op: Permission) -> bool {
        grants(&self.self_rules, originator, op)
    }

    pub fn mentions(&self, originator: &str) -> bool {
        self.rules
            .iter()
            .chain(self.self_rules.iter())
            .any(|r| r.originator.as_bytes() == originator.as_bytes())
    }
}

fn grants(rules: &[AccessRule], originator: &str, op: Permission) -> bool {
    rules
        .iter()
        .any(|r| r.originator.as_bytes() == originator.as_bytes() && r.acop.contains(op))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Allow,
    Deny,
}

impl Decision {
    pub fn is_allow(self) -> bool {
        self == Decision::Allow
    }
}

/// Allow iff some rule of some policy names the originator and its mask
/// includes `op`.
pub fn check_access<'a, I>(policies: I, originator: &str, op: Permission) -> Decision
where
    I: IntoIterator<Item = &'a AccessPolicy>,
{
    if policies.into_iter().any(|p| p.grants(originator, op)) {
        Decision::Allow
    } else {
        Decision::Deny
    }
}
