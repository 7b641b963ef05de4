//! Token service and verifier. Tokens are HS256 JWTs signed with a secret
//! shared between the two; the verifier applies its checks in a fixed
//! order so the first failing rule names the verdict.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use citylab_resource::Clock;
use jsonwebtoken::{decode, encode, Algorithm, DecodingKey, EncodingKey, Header, Validation};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalogue::{AccessClass, Catalogue};
use crate::error::{ApiError, ApiResult, TokenError};

pub const DEFAULT_ISSUER: &str = "authorization.iudx.org.in";
pub const CONSUMER: &str = "consumer";
/// Role of the token the token service attaches to a revoke request.
pub const REVOKER: &str = "revoker";
/// Shortest secret accepted for signing.
pub const MIN_SECRET_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenClaims {
    pub sub: String,
    pub iss: String,
    pub aud: String,
    pub iat: i64,
    pub exp: i64,
    pub iid: String,
    pub role: String,
    /// Never interpreted.
    #[serde(default)]
    pub cons: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemType {
    ResourceServer,
    ResourceGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRequest {
    #[serde(rename = "itemId")]
    pub item_id: String,
    #[serde(rename = "itemType")]
    pub item_type: ItemType,
    pub role: String,
}

#[derive(Debug, thiserror::Error)]
#[error("signing secret must be at least {MIN_SECRET_LEN} bytes")]
pub struct WeakSecret;

#[derive(Clone)]
pub struct Signer {
    enc: EncodingKey,
    dec: DecodingKey,
}

impl Signer {
    pub fn hs256(secret: &[u8]) -> Result<Self, WeakSecret> {
        if secret.len() < MIN_SECRET_LEN {
            return Err(WeakSecret);
        }
        Ok(Self {
            enc: EncodingKey::from_secret(secret),
            dec: DecodingKey::from_secret(secret),
        })
    }

    pub fn sign(&self, claims: &TokenClaims) -> String {
        encode(&Header::new(Algorithm::HS256), claims, &self.enc).expect("hs256 signing")
    }

    /// Signature and shape only; time and audience are checked by the caller.
    pub fn open(&self, token: &str) -> Result<TokenClaims, TokenError> {
        let mut v = Validation::new(Algorithm::HS256);
        v.validate_exp = false;
        v.validate_aud = false;
        v.required_spec_claims = Default::default();
        decode::<TokenClaims>(token, &self.dec, &v)
            .map(|d| d.claims)
            .map_err(|_| TokenError::Invalid)
    }
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
struct Registry {
    /// User id to client secret.
    users: BTreeMap<String, String>,
    /// (user, group id) pairs granted by providers.
    grants: BTreeSet<(String, String)>,
}

/// The embedded authorization server.
pub struct TokenService {
    signer: Signer,
    issuer: String,
    server: String,
    ttl_secs: i64,
    clock: Arc<dyn Clock>,
    catalogue: Arc<Catalogue>,
    registry: RwLock<Registry>,
}

impl TokenService {
    pub fn new(signer: Signer, catalogue: Arc<Catalogue>, clock: Arc<dyn Clock>) -> Self {
        Self {
            signer,
            issuer: DEFAULT_ISSUER.into(),
            server: catalogue.server().to_owned(),
            ttl_secs: 3600,
            clock,
            catalogue,
            registry: RwLock::default(),
        }
    }

    pub fn with_ttl(mut self, secs: i64) -> Self {
        self.ttl_secs = secs;
        self
    }

    pub fn register(&self, user: &str, secret: &str) {
        self.registry.write().users.insert(user.to_owned(), secret.to_owned());
    }

    /// Provider-side policy: `user` may read secure group `group_id`.
    pub fn grant(&self, user: &str, group_id: &str) -> ApiResult<()> {
        if self.catalogue.group(group_id).is_none() {
            return Err(ApiError::UnknownItem(group_id.to_owned()));
        }
        self.registry.write().grants.insert((user.to_owned(), group_id.to_owned()));
        Ok(())
    }

    pub fn authenticate(&self, user: &str, secret: &str) -> ApiResult<()> {
        match self.registry.read().users.get(user) {
            Some(s) if s == secret => Ok(()),
            _ => Err(ApiError::NotRegistered),
        }
    }

    pub fn issue(&self, user: &str, req: &TokenRequest) -> ApiResult<String> {
        let reg = self.registry.read();
        if !reg.users.contains_key(user) {
            return Err(ApiError::NotRegistered);
        }
        if req.role != CONSUMER {
            return Err(ApiError::NoPolicy { user: user.to_owned(), item: req.item_id.clone() });
        }
        match req.item_type {
            ItemType::ResourceServer => {
                if req.item_id != self.server {
                    return Err(ApiError::UnknownItem(req.item_id.clone()));
                }
            }
            ItemType::ResourceGroup => {
                let g = self
                    .catalogue
                    .group(&req.item_id)
                    .ok_or_else(|| ApiError::UnknownItem(req.item_id.clone()))?;
                if g.access == AccessClass::Secure && !reg.grants.contains(&(user.to_owned(), g.id.clone())) {
                    return Err(ApiError::NoPolicy { user: user.to_owned(), item: g.id });
                }
            }
        }
        let iat = self.clock.now().timestamp();
        Ok(self.signer.sign(&TokenClaims {
            sub: user.to_owned(),
            iss: self.issuer.clone(),
            aud: self.server.clone(),
            iat,
            exp: iat + self.ttl_secs,
            iid: req.item_id.clone(),
            role: req.role.clone(),
            cons: Value::Object(Default::default()),
        }))
    }

    /// The credential forwarded with a revoke request for `user`.
    pub fn revocation_request(&self, user: &str) -> String {
        let iat = self.clock.now().timestamp();
        self.signer.sign(&TokenClaims {
            sub: user.to_owned(),
            iss: self.issuer.clone(),
            aud: self.server.clone(),
            iat,
            exp: iat + 60,
            iid: self.server.clone(),
            role: REVOKER.into(),
            cons: Value::Null,
        })
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(&*self.registry.read()).expect("json")
    }

    pub fn load_json(&self, v: &Value) -> Result<(), serde_json::Error> {
        *self.registry.write() = serde_json::from_value(v.clone())?;
        Ok(())
    }
}

/// Per-user revocation cutoffs, optionally persisted as JSON.
#[derive(Default)]
pub struct Revocations {
    cutoffs: RwLock<BTreeMap<String, i64>>,
    path: Option<PathBuf>,
}

impl Revocations {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> std::io::Result<Self> {
        let cutoffs = if path.exists() {
            serde_json::from_slice(&std::fs::read(path)?).map_err(std::io::Error::other)?
        } else {
            BTreeMap::new()
        };
        Ok(Self {
            cutoffs: RwLock::new(cutoffs),
            path: Some(path.to_owned()),
        })
    }

    /// Stores `max(existing, at)` and returns it.
    pub fn revoke(&self, sub: &str, at: i64) -> i64 {
        let mut m = self.cutoffs.write();
        let c = m.entry(sub.to_owned()).or_insert(at);
        *c = (*c).max(at);
        let out = *c;
        if let Some(p) = &self.path {
            let tmp = p.with_extension("tmp");
            let res = std::fs::write(&tmp, serde_json::to_vec(&*m).expect("json")).and_then(|_| std::fs::rename(&tmp, p));
            if let Err(e) = res {
                tracing::error!("persisting revocations: {e}");
            }
        }
        out
    }

    pub fn cutoff(&self, sub: &str) -> Option<i64> {
        self.cutoffs.read().get(sub).copied()
    }
}

/// Resource-server side checks.
pub struct Verifier {
    signer: Signer,
    server: String,
    revocations: Revocations,
}

impl Verifier {
    pub fn new(signer: Signer, server: impl Into<String>, revocations: Revocations) -> Self {
        Self {
            signer,
            server: server.into(),
            revocations,
        }
    }

    pub fn revocations(&self) -> &Revocations {
        &self.revocations
    }

    /// Signature, expiry, audience, coverage of `item_id`, then revocation.
    pub fn verify(&self, token: &str, item_id: &str, catalogue: &Catalogue, now: i64) -> Result<TokenClaims, TokenError> {
        let claims = self.signer.open(token)?;
        if claims.exp <= now {
            return Err(TokenError::Expired);
        }
        if claims.aud != self.server {
            return Err(TokenError::WrongAudience);
        }
        if claims.role != CONSUMER || !covers(&claims.iid, &self.server, item_id, catalogue) {
            return Err(TokenError::NotCovered(item_id.to_owned()));
        }
        if self.revocations.cutoff(&claims.sub).is_some_and(|c| claims.iat <= c) {
            return Err(TokenError::Revoked);
        }
        Ok(claims)
    }

    /// Checks a revoke request and records `now` as the user's cutoff.
    pub fn accept_revocation(&self, token: &str, now: i64) -> ApiResult<(String, i64)> {
        let claims = self.signer.open(token).map_err(|_| ApiError::Unauthenticated)?;
        if claims.role != REVOKER || claims.aud != self.server || claims.exp <= now {
            return Err(ApiError::Unauthenticated);
        }
        let cutoff = self.revocations.revoke(&claims.sub, now);
        Ok((claims.sub, cutoff))
    }
}

/// A server-wide token covers every open item; a group token covers its
/// own group only.
fn covers(iid: &str, server: &str, item_id: &str, catalogue: &Catalogue) -> bool {
    let Ok((_, group)) = catalogue.resolve(item_id) else {
        return false;
    };
    if iid == server {
        group.access == AccessClass::Open
    } else {
        iid == group.id
    }
}
