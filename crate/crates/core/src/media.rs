//! Raw video ingest: YUV4MPEG2 parsing, luma planes, and 2:1 downscaling.
//!
//! Only the luma plane is retained. Chroma payloads are skipped at read time.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_DIMENSION: usize = 8;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("frame dimensions {width}x{height} below the 8x8 minimum")]
    TooSmall { width: usize, height: usize },
    #[error("sample buffer holds {got} values, expected {expected}")]
    SampleCount { got: usize, expected: usize },
    #[error("odd frame dimensions {width}x{height}; crop to even dimensions first")]
    OddDimensions { width: usize, height: usize },
    #[error("malformed y4m header: {0}")]
    Header(String),
    #[error("fps must be positive")]
    NonPositiveFps,
    #[error("unsupported chroma subsampling tag C{0}")]
    UnsupportedChroma(String),
    #[error("truncated frame payload in frame {frame}")]
    Truncated { frame: usize },
    #[error("sequence must contain at least one frame")]
    Empty,
    #[error("frame {index} is {got_w}x{got_h}, sequence is {width}x{height}")]
    MixedDimensions {
        index: usize,
        width: usize,
        height: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One 8-bit luma plane, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct LumaFrame {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl std::fmt::Debug for LumaFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LumaFrame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl LumaFrame {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self, MediaError> {
        if width < MIN_DIMENSION || height < MIN_DIMENSION {
            return Err(MediaError::TooSmall { width, height });
        }
        if samples.len() != width * height {
            return Err(MediaError::SampleCount {
                got: samples.len(),
                expected: width * height,
            });
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, MediaError> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a frame by evaluating `f(x, y)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, MediaError> {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self::new(width, height, samples)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[u8] {
        &self.samples[y * self.width..(y + 1) * self.width]
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    /// Extends the frame to `width`x`height` by replicating the last column and row.
    pub fn pad_to(&self, width: usize, height: usize) -> LumaFrame {
        assert!(width >= self.width && height >= self.height);
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            let row = self.row(y.min(self.height - 1));
            samples.extend_from_slice(row);
            let last = row[self.width - 1];
            samples.resize(samples.len() + (width - self.width), last);
        }
        LumaFrame {
            width,
            height,
            samples,
        }
    }

    /// Top-left `width`x`height` region.
    pub fn crop(&self, width: usize, height: usize) -> Result<LumaFrame, MediaError> {
        assert!(width <= self.width && height <= self.height);
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            samples.extend_from_slice(&self.row(y)[..width]);
        }
        LumaFrame::new(width, height, samples)
    }
}

/// Frame rate as a positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self, MediaError> {
        if num == 0 || den == 0 {
            return Err(MediaError::NonPositiveFps);
        }
        Ok(Self { num, den })
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoSequence {
    frames: Vec<LumaFrame>,
    fps: Fps,
}

impl VideoSequence {
    pub fn new(frames: Vec<LumaFrame>, fps: Fps) -> Result<Self, MediaError> {
        let first = frames.first().ok_or(MediaError::Empty)?;
        let (width, height) = (first.width, first.height);
        for (index, f) in frames.iter().enumerate() {
            if f.width != width || f.height != height {
                return Err(MediaError::MixedDimensions {
                    index,
                    width,
                    height,
                    got_w: f.width,
                    got_h: f.height,
                });
            }
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[LumaFrame] {
        &self.frames
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Applies a per-frame transform, keeping the frame rate.
    pub fn try_map(
        &self,
        f: impl FnMut(&LumaFrame) -> Result<LumaFrame, MediaError>,
    ) -> Result<VideoSequence, MediaError> {
        let frames = self.frames.iter().map(f).collect::<Result<Vec<_>, _>>()?;
        VideoSequence::new(frames, self.fps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chroma {
    C420,
    Mono,
}

impl Chroma {
    fn parse(tag: &str) -> Result<Self, MediaError> {
        match tag {
            "420" | "420jpeg" | "420paldv" => Ok(Chroma::C420),
            "mono" => Ok(Chroma::Mono),
            other => Err(MediaError::UnsupportedChroma(other.to_string())),
        }
    }

    fn payload_len(self, width: usize, height: usize) -> usize {
        match self {
            Chroma::C420 => 2 * width.div_ceil(2) * height.div_ceil(2),
            Chroma::Mono => 0,
        }
    }
}

struct Y4mHeader {
    width: usize,
    height: usize,
    fps: Fps,
    chroma: Chroma,
}

fn parse_header(line: &str) -> Result<Y4mHeader, MediaError> {
    let mut tokens = line.split_ascii_whitespace();
    if tokens.next() != Some("YUV4MPEG2") {
        return Err(MediaError::Header("missing YUV4MPEG2 signature".into()));
    }
    let (mut width, mut height, mut fps) = (None, None, None);
    // Absent C tag means 4:2:0 by convention.
    let mut chroma = Chroma::C420;
    for tok in tokens {
        let (tag, val) = tok.split_at(1);
        match tag {
            "W" => width = Some(parse_num::<usize>(val, "W")?),
            "H" => height = Some(parse_num::<usize>(val, "H")?),
            "F" => {
                let (n, d) = val
                    .split_once(':')
                    .ok_or_else(|| MediaError::Header(format!("bad frame rate F{val}")))?;
                fps = Some(Fps::new(parse_num(n, "F")?, parse_num(d, "F")?)?);
            }
            "C" => chroma = Chroma::parse(val)?,
            "I" | "A" | "X" => {}
            _ => return Err(MediaError::Header(format!("unknown tag {tok}"))),
        }
    }
    let width = width.ok_or_else(|| MediaError::Header("missing W tag".into()))?;
    let height = height.ok_or_else(|| MediaError::Header("missing H tag".into()))?;
    let fps = fps.ok_or_else(|| MediaError::Header("missing F tag".into()))?;
    if width < MIN_DIMENSION || height < MIN_DIMENSION {
        return Err(MediaError::TooSmall { width, height });
    }
    Ok(Y4mHeader {
        width,
        height,
        fps,
        chroma,
    })
}

fn parse_num<T: std::str::FromStr>(val: &str, tag: &str) -> Result<T, MediaError> {
    val.parse()
        .map_err(|_| MediaError::Header(format!("bad value for {tag}: {val:?}")))
}

fn read_line<R: BufRead>(reader: &mut R) -> Result<Option<String>, MediaError> {
    let mut buf = Vec::new();
    let n = reader.read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
    }
    String::from_utf8(buf)
        .map(Some)
        .map_err(|_| MediaError::Header("non-ASCII header line".into()))
}

/// Reads every frame's luma plane from a YUV4MPEG2 stream.
pub fn read_y4m<R: BufRead>(mut reader: R) -> Result<VideoSequence, MediaError> {
    let header_line =
        read_line(&mut reader)?.ok_or_else(|| MediaError::Header("empty stream".into()))?;
    let header = parse_header(&header_line)?;
    let luma_len = header.width * header.height;
    let chroma_len = header.chroma.payload_len(header.width, header.height);

    let mut frames = Vec::new();
    let mut chroma_sink = vec![0u8; chroma_len];
    while let Some(line) = read_line(&mut reader)? {
        if !line.starts_with("FRAME") {
            return Err(MediaError::Header(format!(
                "expected FRAME marker, found {line:?}"
            )));
        }
        let frame = frames.len();
        let mut luma = vec![0u8; luma_len];
        read_payload(&mut reader, &mut luma, frame)?;
        read_payload(&mut reader, &mut chroma_sink, frame)?;
        frames.push(LumaFrame::new(header.width, header.height, luma)?);
    }
    VideoSequence::new(frames, header.fps)
}

fn read_payload<R: Read>(reader: &mut R, buf: &mut [u8], frame: usize) -> Result<(), MediaError> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => MediaError::Truncated { frame },
        _ => MediaError::Io(e),
    })
}

/// Writes a sequence as YUV4MPEG2. For 4:2:0 output the chroma planes are mid-gray.
pub fn write_y4m<W: Write>(
    seq: &VideoSequence,
    chroma: Chroma,
    mut writer: W,
) -> Result<(), MediaError> {
    let tag = match chroma {
        Chroma::C420 => "420jpeg",
        Chroma::Mono => "mono",
    };
    writeln!(
        writer,
        "YUV4MPEG2 W{} H{} F{}:{} Ip A1:1 C{}",
        seq.width(),
        seq.height(),
        seq.fps.num,
        seq.fps.den,
        tag
    )?;
    let gray = vec![128u8; chroma.payload_len(seq.width(), seq.height())];
    for f in &seq.frames {
        writer.write_all(b"FRAME\n")?;
        writer.write_all(&f.samples)?;
        writer.write_all(&gray)?;
    }
    writer.flush()?;
    Ok(())
}

/// 2:1 box-filter downscale: each output sample is the mean of a 2x2 block,
/// rounded half up.
pub fn downscale_half(frame: &LumaFrame) -> Result<LumaFrame, MediaError> {
    let (w, h) = (frame.width, frame.height);
    if w % 2 != 0 || h % 2 != 0 {
        return Err(MediaError::OddDimensions {
            width: w,
            height: h,
        });
    }
    let (ow, oh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        let r0 = frame.row(2 * y);
        let r1 = frame.row(2 * y + 1);
        for x in 0..ow {
            let sum =
                r0[2 * x] as u32 + r0[2 * x + 1] as u32 + r1[2 * x] as u32 + r1[2 * x + 1] as u32;
            out.push(((sum + 2) / 4) as u8);
        }
    }
    // No 8x8 minimum here: the encoder pads any input up to a whole CTU.
    Ok(LumaFrame {
        width: ow,
        height: oh,
        samples: out,
    })
}

/// Drops the last column and/or row when the dimension is odd.
pub fn crop_to_even(frame: &LumaFrame) -> Result<LumaFrame, MediaError> {
    frame.crop(frame.width & !1, frame.height & !1)
}
