//! Core of the Diaolou heritage studio: the bilingual corpus, the
//! authenticity guardrails, prompt scaffolding with the persona guide, the
//! image generation pipeline and the session store.

pub mod corpus;
mod gate;
pub mod guardrails;
pub mod imaging;
pub mod lang;
pub mod record;
pub mod scaffold;
pub mod store;
