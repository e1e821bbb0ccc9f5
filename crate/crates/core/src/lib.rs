//! Capacity-equivocation and secrecy regions for generalized multiple-access
//! channels with confidential messages.

pub mod channel;
pub mod info;
pub mod regions;
pub mod closed_form;
pub mod sim;
pub mod verify;
pub mod cli;
