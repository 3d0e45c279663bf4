//! Domain types, per-role workspace layout, and completion caching.

pub mod cache;
pub mod profile;
pub mod segment;
pub mod types;
pub mod workspace;

pub use cache::{cache_key, sha256_hex, CacheEntry, CacheStore};
pub use segment::segment_life_experience;
pub use types::{
    Dialogue, DialogueOrigin, DialoguePair, HallucinationProbe, LanguageTag, LifeSegment,
    RoleProfile, Scene, SceneOrigin, Turn, TurnAction,
};
pub use workspace::{init_workspace, Workspace, WorkspaceManifest};
