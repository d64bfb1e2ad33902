//! Multi-party GAN training over in-process messages.
//!
//! Random streams are children of the run's root stream:
//!
//! | label           | party | index | use                                   |
//! |-----------------|-------|-------|---------------------------------------|
//! | `shared`        | 0     | 0     | batch indices and latents, all parties |
//! | `gumbel`        | i     | 0     | Gumbel noise of party `i`'s head       |
//! | `interp`        | i     | 0     | penalty interpolation at party `i`     |
//! | `dp-noise`      | i     | 0     | Gaussian mechanism at party `i`        |
//! | `server-interp` | 0     | 0     | penalty interpolation at the server    |
//! | `init`          | i     | 0/1/2 | generator / first / second critic part |
//! | `init`          | M     | 0     | server critic                          |
//! | `init`          | 0     | 3     | shared generator backbone              |
//! | `fd-log`        | 0     | epoch | per-epoch FD sample                    |

mod checkpoint;
mod common;
mod config;
mod generate;
mod local;
mod messages;
mod train;
mod vfl;

pub use checkpoint::{
    decode_generators, encode_generators, load_checkpoint, save_checkpoint, sidecar_path,
    CheckpointMeta, MAGIC, VERSION,
};
pub use common::{DiscReport, PrivatizedSlice};
pub use config::{GanConfig, Variant};
pub use generate::{
    generate, party_synthesize, split_party_blocks, synthesize_table, Generators, PartyGenerator,
};
pub use local::{aggregate_backbone, LocalParty, LocalSystem};
pub use messages::ProtocolMessage;
pub use train::{
    build, party_data, train, EpochRecord, PartyData, Protocol, TrainLog, TrainOutput,
};
pub use vfl::{Server, VflParty, VflSystem};
