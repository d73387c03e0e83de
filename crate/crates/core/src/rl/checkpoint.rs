//! Binary checkpoint format (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes  "IOTCPPO1"
//! n_networks   u32      always 2: actor, then critic
//! per network:
//!   n_sizes    u32      number of layer widths (input .. output)
//!   sizes      u32 x n_sizes
//!   params     f64 x sum(in*out + out)   per layer: weights row-major, then biases
//! ```
//!
//! Floats are stored bit-for-bit, so save/load round-trips exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ActorCritic, Mlp};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"IOTCPPO1";

fn corrupt(msg: impl std::fmt::Display) -> Error {
    Error::Checkpoint(format!("corrupt checkpoint: {msg}"))
}

pub fn write_checkpoint<W: Write>(net: &ActorCritic, out: &mut W) -> std::io::Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&2u32.to_le_bytes())?;
    for mlp in [&net.actor, &net.critic] {
        out.write_all(&(mlp.sizes().len() as u32).to_le_bytes())?;
        for &s in mlp.sizes() {
            out.write_all(&(s as u32).to_le_bytes())?;
        }
        for p in mlp.params() {
            out.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b).map_err(corrupt)?;
    Ok(u32::from_le_bytes(b))
}

fn read_mlp<R: Read>(input: &mut R) -> Result<Mlp> {
    let n_sizes = read_u32(input)? as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(corrupt(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes)
        .map(|_| read_u32(input).map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    if sizes.iter().any(|&s| s == 0 || s > 1 << 20) {
        return Err(corrupt(format!("implausible layer sizes {sizes:?}")));
    }
    let n = Mlp::param_count(&sizes);
    let mut params = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        input.read_exact(&mut b).map_err(corrupt)?;
        params.push(f64::from_le_bytes(b));
    }
    Mlp::from_params(&sizes, params).ok_or_else(|| corrupt("parameter count mismatch"))
}

/// SHA-256 of the serialized parameters.
pub fn network_digest(net: &ActorCritic) -> String {
    use sha2::{Digest, Sha256};
    let mut bytes = Vec::new();
    write_checkpoint(net, &mut bytes).expect("writing to memory cannot fail");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<ActorCritic> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(corrupt)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let n = read_u32(input)?;
    if n != 2 {
        return Err(corrupt(format!("expected 2 networks, found {n}")));
    }
    let actor = read_mlp(input)?;
    let critic = read_mlp(input)?;
    if actor.input_size() != critic.input_size() || critic.output_size() != 1 {
        return Err(corrupt("actor and critic shapes are inconsistent"));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(corrupt)? != 0 {
        return Err(corrupt("trailing bytes"));
    }
    Ok(ActorCritic { actor, critic })
}

pub fn save_checkpoint(net: &ActorCritic, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_checkpoint(net, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint and checks it against the expected observation
/// length and action count.
pub fn load_checkpoint(path: &Path, input_size: usize, n_actions: usize) -> Result<ActorCritic> {
    let file = File::open(path)
        .map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", path.display())))?;
    let net = read_checkpoint(&mut BufReader::new(file))
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if net.input_size() != input_size || net.n_actions() != n_actions {
        return Err(Error::Checkpoint(format!(
            "{}: checkpoint expects {} inputs and {} actions, configuration needs {} and {}",
            path.display(),
            net.input_size(),
            net.n_actions(),
            input_size,
            n_actions
        )));
    }
    Ok(net)
}
