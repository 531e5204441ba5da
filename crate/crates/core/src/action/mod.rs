//! The action command language agents use to act on the station.

mod parser;
pub mod payload;
mod schema;

pub use parser::{
    match_command, parse_response, parse_response_with, render, ActionInvocation, Diagnostic, ParseOptions,
    ParseOutcome, COMMAND_PREFIX,
};
pub use payload::{Payload, PayloadValue};
pub use schema::{
    split_list, validate_payload, FieldKind, FieldSchema, FieldSpec, FieldValue, Fields, ValidationError,
};
