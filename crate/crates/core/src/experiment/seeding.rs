use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams drawn from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Data = 1,
    Init = 2,
    BatchOrder = 3,
    Ginelli = 4,
    Tangent = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
