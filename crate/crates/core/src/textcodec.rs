//! Lossless coding of textual representations.
//!
//! Canonical text is split into tokens from a fixed alphabet (keywords,
//! vocabulary words, hexadecimal digits behind a length token, line ends).
//! The fields already present in the uncompressed bitstream header (canvas
//! and budget) are left out of the payload; the remaining tokens go through
//! an adaptive order-1 model and a 32-bit binary arithmetic coder.
//!
//! Byte layout (big-endian):
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 4     | magic `TTC1`                            |
//! | 1     | format version                          |
//! | 3     | budget `L`, `R`, `W`                    |
//! | 2 + 2 | canvas width, height                    |
//! | 4     | payload length in bits                  |
//! | ...   | payload, last byte zero-padded          |

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::image::Canvas;
use crate::scene::SceneKind;
use crate::transform::{parse, serialize, Budget, TextualRepresentation};
use crate::vocab::{Descriptor, Shape, NOISE_WORD};

pub const MAGIC: [u8; 4] = *b"TTC1";
pub const FORMAT_VERSION: u8 = 1;
/// Header bits counted toward the rate: version, budget, canvas and the
/// payload length field.
pub const HEADER_BITS: u64 = 96;
const HEADER_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("non-canonical text: {0}")]
    NonCanonical(String),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    VersionMismatch(u8),
    #[error("stream shorter than its header")]
    TruncatedHeader,
    #[error("payload truncated: {have} bytes, header promises {want}")]
    Truncated { have: usize, want: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("invalid header field: {0}")]
    InvalidHeader(&'static str),
    #[error("arithmetic decoder lost synchronization: {0}")]
    Desync(String),
}

/// Keywords of the canonical grammar, in token-id order.
const KEYWORDS: [&str; 14] = [
    "SCENE", "KIND", "W", "H", "BG", "L", "R", "WD", "N", "OBJ", "AT", "SIZE", "ROT", "DESC",
];
/// Header keys written as `KEY=value`.
const ASSIGNED: [&str; 8] = ["KIND", "W", "H", "BG", "L", "R", "WD", "N"];
const MAX_DIGITS: usize = 4;

const KEYWORD_BASE: u8 = 0;
const EOL: u8 = KEYWORDS.len() as u8; // 14
const KIND_FLAT: u8 = EOL + 1; // 15
const CLASS_BASE: u8 = KIND_FLAT + 1; // 16: six shapes then `noise`
const NOISE_TOKEN: u8 = CLASS_BASE + Shape::ALL.len() as u8; // 22
const DESC_BASE: u8 = NOISE_TOKEN + 1; // 23
const DIGIT_BASE: u8 = DESC_BASE + Descriptor::COUNT as u8; // 47
const LEN_BASE: u8 = DIGIT_BASE + 16; // 63: LEN1..LEN4
const EOS: u8 = LEN_BASE + MAX_DIGITS as u8; // 67
/// Size of the token alphabet.
pub const ALPHABET_SIZE: usize = EOS as usize + 1;

/// One symbol of the token alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(u8);

impl Token {
    pub const EOS: Token = Token(EOS);
    pub const EOL: Token = Token(EOL);

    pub fn id(self) -> u8 {
        self.0
    }

    fn keyword(word: &str) -> Option<Token> {
        KEYWORDS
            .iter()
            .position(|&k| k == word)
            .map(|i| Token(KEYWORD_BASE + i as u8))
    }

    fn word(word: &str) -> Option<Token> {
        if word == "flat" {
            return Some(Token(KIND_FLAT));
        }
        if word == NOISE_WORD {
            return Some(Token(NOISE_TOKEN));
        }
        if let Some(s) = Shape::from_word(word) {
            return Some(Token(CLASS_BASE + s.index() as u8));
        }
        Descriptor::from_word(word).map(|d| Token(DESC_BASE + d.index() as u8))
    }

    fn text(self) -> Option<&'static str> {
        let id = self.0;
        Some(match id {
            _ if id < EOL => KEYWORDS[id as usize],
            KIND_FLAT => "flat",
            NOISE_TOKEN => NOISE_WORD,
            _ if (CLASS_BASE..NOISE_TOKEN).contains(&id) => Shape::ALL[(id - CLASS_BASE) as usize].word(),
            _ if (DESC_BASE..DIGIT_BASE).contains(&id) => {
                Descriptor::from_index((id - DESC_BASE) as usize)?.word()
            }
            _ => return None,
        })
    }

    fn digit(self) -> Option<u32> {
        (DIGIT_BASE..LEN_BASE)
            .contains(&self.0)
            .then(|| (self.0 - DIGIT_BASE) as u32)
    }

    fn length(self) -> Option<usize> {
        (LEN_BASE..EOS)
            .contains(&self.0)
            .then(|| (self.0 - LEN_BASE) as usize + 1)
    }
}

fn push_number(out: &mut Vec<Token>, value: u32) -> Result<(), CodecError> {
    let mut digits = [0u8; MAX_DIGITS];
    let mut n = 0;
    let mut v = value;
    loop {
        if n == MAX_DIGITS {
            return Err(CodecError::NonCanonical(format!("integer {value} exceeds 4 hex digits")));
        }
        digits[n] = (v & 0xf) as u8;
        n += 1;
        v >>= 4;
        if v == 0 {
            break;
        }
    }
    out.push(Token(LEN_BASE + n as u8 - 1));
    out.extend(digits[..n].iter().rev().map(|&d| Token(DIGIT_BASE + d)));
    Ok(())
}

fn push_value(out: &mut Vec<Token>, text: &str) -> Result<(), CodecError> {
    let canonical_number = !text.is_empty()
        && text.bytes().all(|b| b.is_ascii_digit())
        && (text == "0" || !text.starts_with('0'));
    if canonical_number {
        let v: u32 = text
            .parse()
            .map_err(|_| CodecError::NonCanonical(format!("integer {text} too large")))?;
        return push_number(out, v);
    }
    let token = Token::word(text)
        .or_else(|| Token::keyword(text))
        .ok_or_else(|| CodecError::NonCanonical(format!("unknown word {text:?}")))?;
    out.push(token);
    Ok(())
}

/// Splits canonical text into tokens. `detokenize` inverts it exactly.
pub fn tokenize(text: &str) -> Result<Vec<Token>, CodecError> {
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| CodecError::NonCanonical("missing final newline".into()))?;
    let mut out = Vec::new();
    for line in body.split('\n') {
        for word in line.split(' ') {
            match word.split_once('=') {
                Some((key, value)) if ASSIGNED.contains(&key) => {
                    out.push(Token::keyword(key).expect("assigned keys are keywords"));
                    push_value(&mut out, value)?;
                }
                Some(_) => return Err(CodecError::NonCanonical(format!("unexpected {word:?}"))),
                None => push_value(&mut out, word)?,
            }
        }
        out.push(Token::EOL);
    }
    if detokenize(&out).as_deref() != Ok(text) {
        return Err(CodecError::NonCanonical("text does not survive tokenization".into()));
    }
    Ok(out)
}

/// Reassembles text from tokens.
pub fn detokenize(tokens: &[Token]) -> Result<String, CodecError> {
    let mut out = String::new();
    let mut i = 0;
    let mut line_start = true;
    while i < tokens.len() {
        let t = tokens[i];
        i += 1;
        if t == Token::EOL {
            out.push('\n');
            line_start = true;
            continue;
        }
        if !line_start {
            out.push(' ');
        }
        line_start = false;
        if let Some(n) = t.length() {
            let digits = tokens
                .get(i..i + n)
                .ok_or_else(|| CodecError::Desync("number cut short".into()))?;
            let mut v = 0u32;
            for d in digits {
                v = v * 16 + d.digit().ok_or_else(|| CodecError::Desync("expected a digit".into()))?;
            }
            if n > 1 && digits[0].digit() == Some(0) {
                return Err(CodecError::Desync("leading zero digit".into()));
            }
            i += n;
            out.push_str(&format!("{v}"));
            continue;
        }
        let word = t
            .text()
            .ok_or_else(|| CodecError::Desync(format!("token {} out of place", t.0)))?;
        out.push_str(word);
        if ASSIGNED.contains(&word) && t.0 < EOL {
            out.push('=');
            // The value follows without a separating space.
            line_start = true;
        }
    }
    Ok(out)
}

/// Adaptive frequency model conditioned on the previous token.
struct ContextModel {
    counts: Vec<u32>,
    totals: Vec<u32>,
}

const INCREMENT: u32 = 32;
const RESCALE_LIMIT: u32 = 1 << 16;
/// Context index used before the first token.
const START_CONTEXT: usize = ALPHABET_SIZE;

impl ContextModel {
    fn new() -> Self {
        let contexts = ALPHABET_SIZE + 1;
        ContextModel {
            counts: vec![1; contexts * ALPHABET_SIZE],
            totals: vec![ALPHABET_SIZE as u32; contexts],
        }
    }

    fn row(&self, context: usize) -> &[u32] {
        &self.counts[context * ALPHABET_SIZE..(context + 1) * ALPHABET_SIZE]
    }

    /// `(cumulative low, cumulative high, total)` of `symbol`.
    fn interval(&self, context: usize, symbol: usize) -> (u32, u32, u32) {
        let row = self.row(context);
        let low: u32 = row[..symbol].iter().sum();
        (low, low + row[symbol], self.totals[context])
    }

    /// Symbol whose interval contains `target`, with that interval.
    fn find(&self, context: usize, target: u32) -> (usize, u32, u32) {
        let row = self.row(context);
        let mut low = 0;
        for (symbol, &c) in row.iter().enumerate() {
            if target < low + c {
                return (symbol, low, low + c);
            }
            low += c;
        }
        unreachable!("target below total")
    }

    fn update(&mut self, context: usize, symbol: usize) {
        let base = context * ALPHABET_SIZE;
        self.counts[base + symbol] += INCREMENT;
        self.totals[context] += INCREMENT;
        if self.totals[context] > RESCALE_LIMIT {
            let row = &mut self.counts[base..base + ALPHABET_SIZE];
            for c in row.iter_mut() {
                *c = (*c / 2).max(1);
            }
            self.totals[context] = row.iter().sum();
        }
    }
}

const WHOLE: u64 = 1 << 32;
const HALF: u64 = WHOLE / 2;
const QUARTER: u64 = WHOLE / 4;

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    fn push(&mut self, bit: bool) {
        if self.bits.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.last_mut().expect("byte allocated");
            *last |= 0x80 >> (self.bits % 8);
        }
        self.bits += 1;
    }
}

struct ArithmeticEncoder {
    low: u64,
    high: u64,
    pending: u64,
    out: BitWriter,
}

impl ArithmeticEncoder {
    fn new() -> Self {
        ArithmeticEncoder {
            low: 0,
            high: WHOLE - 1,
            pending: 0,
            out: BitWriter::default(),
        }
    }

    fn emit(&mut self, bit: bool) {
        self.out.push(bit);
        for _ in 0..self.pending {
            self.out.push(!bit);
        }
        self.pending = 0;
    }

    fn encode(&mut self, low: u32, high: u32, total: u32) {
        let range = self.high - self.low + 1;
        self.high = self.low + range * high as u64 / total as u64 - 1;
        self.low += range * low as u64 / total as u64;
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < 3 * QUARTER {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low *= 2;
            self.high = 2 * self.high + 1;
        }
    }

    /// Two disambiguating bits (plus any pending ones) close the stream.
    fn finish(mut self) -> BitWriter {
        self.pending += 1;
        let bit = self.low >= QUARTER;
        self.emit(bit);
        self.out
    }
}

struct ArithmeticDecoder<'a> {
    low: u64,
    high: u64,
    value: u64,
    payload: &'a [u8],
    payload_bits: u64,
    position: u64,
    /// Renormalization shifts so far; the encoder wrote `shifts + 2` bits.
    shifts: u64,
}

impl<'a> ArithmeticDecoder<'a> {
    fn new(payload: &'a [u8], payload_bits: u64) -> Self {
        let mut d = ArithmeticDecoder {
            low: 0,
            high: WHOLE - 1,
            value: 0,
            payload,
            payload_bits,
            position: 0,
            shifts: 0,
        };
        for _ in 0..32 {
            d.value = (d.value << 1) | d.next_bit();
        }
        d
    }

    /// Bits past the recorded length read as zero.
    fn next_bit(&mut self) -> u64 {
        let p = self.position;
        self.position += 1;
        if p >= self.payload_bits {
            return 0;
        }
        ((self.payload[(p / 8) as usize] >> (7 - p % 8)) & 1) as u64
    }

    fn target(&self, total: u32) -> u32 {
        let range = self.high - self.low + 1;
        (((self.value - self.low + 1) * total as u64 - 1) / range) as u32
    }

    fn consume(&mut self, low: u32, high: u32, total: u32) {
        let range = self.high - self.low + 1;
        self.high = self.low + range * high as u64 / total as u64 - 1;
        self.low += range * low as u64 / total as u64;
        loop {
            if self.high < HALF {
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.value -= HALF;
            } else if self.low >= QUARTER && self.high < 3 * QUARTER {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.value -= QUARTER;
            } else {
                break;
            }
            self.low *= 2;
            self.high = 2 * self.high + 1;
            self.value = 2 * self.value + self.next_bit();
            self.shifts += 1;
        }
    }
}

/// Entropy-coded representation. `payload_bits` is the exact coded length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitstream {
    pub budget: Budget,
    pub canvas: Canvas,
    pub payload_bits: u32,
    pub payload: Vec<u8>,
}

impl Bitstream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&[
            self.budget.max_objects(),
            self.budget.resolution_bits(),
            self.budget.words_per_object(),
        ]);
        out.extend_from_slice(&(self.canvas.width as u16).to_be_bytes());
        out.extend_from_slice(&(self.canvas.height as u16).to_be_bytes());
        out.extend_from_slice(&self.payload_bits.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < 4 {
            return Err(CodecError::TruncatedHeader);
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("four bytes");
        if magic != MAGIC {
            return Err(CodecError::BadMagic(magic));
        }
        if bytes.len() < HEADER_BYTES {
            return Err(CodecError::TruncatedHeader);
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(CodecError::VersionMismatch(bytes[4]));
        }
        let budget = Budget::new(bytes[5], bytes[6], bytes[7])
            .map_err(|_| CodecError::InvalidHeader("budget out of range"))?;
        let width = u16::from_be_bytes([bytes[8], bytes[9]]) as u32;
        let height = u16::from_be_bytes([bytes[10], bytes[11]]) as u32;
        let canvas = Canvas::new(width, height);
        if !canvas.is_valid() {
            return Err(CodecError::InvalidHeader("canvas out of range"));
        }
        let payload_bits = u32::from_be_bytes(bytes[12..16].try_into().expect("four bytes"));
        let want = (payload_bits as usize).div_ceil(8);
        let have = bytes.len() - HEADER_BYTES;
        if have < want {
            return Err(CodecError::Truncated { have, want });
        }
        if have > want {
            return Err(CodecError::TrailingBytes(have - want));
        }
        let payload = bytes[HEADER_BYTES..].to_vec();
        if payload_bits % 8 != 0 {
            let last = payload[want - 1];
            if last & (0xff >> (payload_bits % 8)) != 0 {
                return Err(CodecError::InvalidHeader("nonzero padding bits"));
            }
        }
        Ok(Bitstream {
            budget,
            canvas,
            payload_bits,
            payload,
        })
    }
}

/// Exact rate of a stream: recorded payload length plus header cost.
pub fn rate_bits(bits: &Bitstream) -> u64 {
    HEADER_BITS + bits.payload_bits as u64
}

/// Payload tokens: the header line reduced to its kind and background
/// tokens, then every object line, then end-of-stream.
fn payload_tokens(tokens: &[Token]) -> Vec<Token> {
    let header_end = tokens
        .iter()
        .position(|&t| t == Token::EOL)
        .expect("canonical text has a header line");
    let header = &tokens[..header_end];
    let value_after = |key: &str| {
        let k = Token::keyword(key).expect("keyword");
        let at = header.iter().position(|&t| t == k).expect("header key present");
        header[at + 1]
    };
    let mut out = vec![value_after("KIND"), value_after("BG")];
    out.extend_from_slice(&tokens[header_end + 1..]);
    out.push(Token::EOS);
    out
}

/// Lossless coding of a valid representation.
pub fn encode(rep: &TextualRepresentation) -> Bitstream {
    let text = serialize(rep);
    let tokens = tokenize(&text).expect("serialized text is canonical");
    let mut model = ContextModel::new();
    let mut encoder = ArithmeticEncoder::new();
    let mut context = START_CONTEXT;
    for token in payload_tokens(&tokens) {
        let symbol = token.0 as usize;
        let (low, high, total) = model.interval(context, symbol);
        encoder.encode(low, high, total);
        model.update(context, symbol);
        context = symbol;
    }
    let out = encoder.finish();
    Bitstream {
        budget: rep.budget,
        canvas: rep.canvas,
        payload_bits: out.bits as u32,
        payload: out.bytes,
    }
}

/// Upper bound on payload tokens for any valid representation.
const MAX_PAYLOAD_TOKENS: usize = 3 + 255 * 40;

pub fn decode(bits: &Bitstream) -> Result<TextualRepresentation, CodecError> {
    if bits.payload.len() < (bits.payload_bits as usize).div_ceil(8) {
        return Err(CodecError::Truncated {
            have: bits.payload.len(),
            want: (bits.payload_bits as usize).div_ceil(8),
        });
    }
    let mut model = ContextModel::new();
    let mut decoder = ArithmeticDecoder::new(&bits.payload, bits.payload_bits as u64);
    let mut context = START_CONTEXT;
    let mut payload = Vec::new();
    loop {
        if payload.len() >= MAX_PAYLOAD_TOKENS || decoder.shifts > bits.payload_bits as u64 {
            return Err(CodecError::Desync("no end-of-stream token".into()));
        }
        let total = model.totals[context];
        let (symbol, low, high) = model.find(context, decoder.target(total));
        decoder.consume(low, high, total);
        model.update(context, symbol);
        context = symbol;
        if symbol == EOS as usize {
            break;
        }
        payload.push(Token(symbol as u8));
    }
    if decoder.shifts + 2 != bits.payload_bits as u64 {
        return Err(CodecError::Desync(format!(
            "stream ended after {} of {} bits",
            decoder.shifts + 2,
            bits.payload_bits
        )));
    }
    if payload.len() < 2 {
        return Err(CodecError::Desync("payload too short".into()));
    }
    let (kind, background) = (payload[0], payload[1]);
    let body = &payload[2..];
    let objects = body.iter().filter(|&&t| Token::keyword("OBJ") == Some(t)).count();

    let mut tokens = Vec::new();
    let b = bits.budget;
    let mut key = |k: &str| tokens.push(Token::keyword(k).expect("keyword"));
    key("SCENE");
    key("KIND");
    tokens.push(kind);
    let numbers = |tokens: &mut Vec<Token>, k: &str, v: u32| {
        tokens.push(Token::keyword(k).expect("keyword"));
        push_number(tokens, v)
    };
    numbers(&mut tokens, "W", bits.canvas.width)?;
    numbers(&mut tokens, "H", bits.canvas.height)?;
    tokens.push(Token::keyword("BG").expect("keyword"));
    tokens.push(background);
    numbers(&mut tokens, "L", b.max_objects() as u32)?;
    numbers(&mut tokens, "R", b.resolution_bits() as u32)?;
    numbers(&mut tokens, "WD", b.words_per_object() as u32)?;
    numbers(&mut tokens, "N", objects as u32)?;
    tokens.push(Token::EOL);
    tokens.extend_from_slice(body);

    let text = detokenize(&tokens)?;
    let rep = parse(&text).map_err(|e| CodecError::Desync(format!("{e}")))?;
    if serialize(&rep) != text {
        return Err(CodecError::Desync("decoded text is not canonical".into()));
    }
    let expected_kind = match rep.kind {
        SceneKind::Flat => KIND_FLAT,
        SceneKind::Noise => NOISE_TOKEN,
    };
    debug_assert_eq!(kind.0, expected_kind);
    Ok(rep)
}

/// Number of tokens the payload of `rep` codes, end-of-stream included.
pub fn payload_token_count(rep: &TextualRepresentation) -> usize {
    let tokens = tokenize(&serialize(rep)).expect("serialized text is canonical");
    payload_tokens(&tokens).len()
}
