//! Language-model scaffolding: idea elaboration and the persona guide.
//! Every model call goes through [`port::LanguageModelPort`] and has a
//! deterministic fallback.

mod elaborate;
mod persona;
pub mod port;

pub use elaborate::{elaborate_idea, template_elaboration, Elaboration, ElaborationSource, MAX_ELABORATION_CHARS};
pub use persona::{
    narration_for, persona_reply, retrieve, tokens, DialogueRole, DialogueTurn, PersonaError, ReplyKind, Scored,
    MAX_REPLY_CHARS, TOP_K,
};
pub use port::{port_from_env, ChatTurn, FallbackPort, LanguageModelPort, PortError, ScriptedPort, TurnRole};
