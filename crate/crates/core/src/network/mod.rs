//! Rotary-attention discriminator and MLP generator.
//!
//! The discriminator runs three bi-LSTMs over the left context, the target
//! and the right context, then alternates rotary attention and hierarchical
//! attention for a configured number of hops. The four resulting vectors
//! (left context, target-from-left, target-from-right, right context) are
//! concatenated into the `8d` representation, which a softmax head maps to
//! negative/neutral/positive/fake. Generated samples are `8d` vectors in
//! the same block order and enter at the head.

mod checkpoint;
mod forward;
mod params;

#[cfg(test)]
mod oracle;

pub use checkpoint::{Checkpoint, CheckpointError, MAGIC};
pub use forward::{
    bilstm, bilstm_forward, discriminator_forward, discriminator_forward_vec, generator, generator_forward, head,
    hierarchical_attention, representation, representation_vector, rotary_hop, Dropout, Quad,
};
pub use params::{
    BiLstmIds, GeneratorIds, Group, HeadIds, HierarchicalIds, Layout, LstmIds, ModelParams, NetworkConfig, RotaryIds,
    FAKE_CLASS, NUM_OUTPUTS, NUM_REAL_CLASSES,
};

#[cfg(test)]
mod tests;
