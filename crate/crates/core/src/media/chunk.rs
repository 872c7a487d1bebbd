use thiserror::Error;

use super::types::{samples_for_ms, MediaChunk, PcmAudio, MIN_CHUNK_MS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("chunk of {0} ms is below the {MIN_CHUNK_MS} ms floor")]
    ChunkTooSmall(u32),
}

/// Splits audio into `chunk_ms` pieces for the lip-sync backend. The last
/// chunk is marked final and zero-padded up to the 200 ms floor if shorter.
pub fn chunk_audio(audio: &PcmAudio, chunk_ms: u32) -> Result<Vec<MediaChunk>, ChunkError> {
    if chunk_ms < MIN_CHUNK_MS {
        return Err(ChunkError::ChunkTooSmall(chunk_ms));
    }
    let per_chunk = samples_for_ms(audio.sample_rate, chunk_ms as u64).max(1);
    let floor = samples_for_ms(audio.sample_rate, MIN_CHUNK_MS as u64);
    let pieces: Vec<&[i16]> = audio.samples.chunks(per_chunk).collect();
    let last = pieces.len().saturating_sub(1);
    Ok(pieces
        .into_iter()
        .enumerate()
        .map(|(i, piece)| {
            let mut samples = piece.to_vec();
            if samples.len() < floor {
                samples.resize(floor, 0);
            }
            MediaChunk {
                audio: PcmAudio::new(audio.sample_rate, samples),
                content_samples: piece.len(),
                chunk_index: i as u32,
                is_final: i == last,
            }
        })
        .collect())
}
