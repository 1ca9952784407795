//! Reader and writer for the uncompressed little-endian DICOM subset.
//!
//! Supported: Part-10 files (128-byte preamble, `DICM` magic, explicit-VR file
//! meta group) carrying Explicit or Implicit VR Little Endian data sets, plus
//! headerless implicit-VR streams when [`ParseOptions::headerless_implicit`]
//! is set. Sequences of defined and undefined length are kept structurally so
//! that [`write_dicom`] reproduces the input byte for byte. Every other
//! transfer syntax, including encapsulated pixel data, is rejected.

use super::tags::{self, dictionary_vr, Tag, Vr};
use thiserror::Error;

const UNDEFINED_LENGTH: u32 = 0xFFFF_FFFF;
const MAGIC: &[u8; 4] = b"DICM";
const PREAMBLE_LEN: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DicomError {
    #[error("unsupported transfer syntax: {0}")]
    UnsupportedTransferSyntax(String),
    #[error("stream truncated at byte {offset} (needed {needed} more bytes)")]
    TruncatedStream { offset: usize, needed: usize },
    #[error("missing required tag {0}")]
    MissingRequiredTag(Tag),
    #[error("not a DICOM Part-10 stream (no DICM magic after the preamble)")]
    NotDicom,
    #[error("tag {current} follows {previous}; elements must be strictly increasing")]
    TagOrder { previous: Tag, current: Tag },
    #[error("malformed stream at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unsupported image encoding: {0}")]
    UnsupportedImage(String),
}

/// Transfer syntaxes this reader understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TransferSyntax {
    ExplicitVrLittleEndian,
    ImplicitVrLittleEndian,
}

impl TransferSyntax {
    pub const EXPLICIT_LE_UID: &'static str = "1.2.840.10008.1.2.1";
    pub const IMPLICIT_LE_UID: &'static str = "1.2.840.10008.1.2";

    pub fn uid(self) -> &'static str {
        match self {
            TransferSyntax::ExplicitVrLittleEndian => Self::EXPLICIT_LE_UID,
            TransferSyntax::ImplicitVrLittleEndian => Self::IMPLICIT_LE_UID,
        }
    }

    pub fn from_uid(uid: &str) -> Result<Self, DicomError> {
        match uid.trim_end_matches(['\0', ' ']) {
            Self::EXPLICIT_LE_UID => Ok(TransferSyntax::ExplicitVrLittleEndian),
            Self::IMPLICIT_LE_UID => Ok(TransferSyntax::ImplicitVrLittleEndian),
            other => Err(DicomError::UnsupportedTransferSyntax(other.to_string())),
        }
    }

    fn is_explicit(self) -> bool {
        matches!(self, TransferSyntax::ExplicitVrLittleEndian)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Photometric {
    #[serde(rename = "MONOCHROME1")]
    Monochrome1,
    #[serde(rename = "MONOCHROME2")]
    Monochrome2,
}

impl Photometric {
    pub fn code(self) -> &'static str {
        match self {
            Photometric::Monochrome1 => "MONOCHROME1",
            Photometric::Monochrome2 => "MONOCHROME2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bytes(Vec<u8>),
    Sequence(Sequence),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub items: Vec<Item>,
    pub undefined_length: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub elements: DataSet,
    pub undefined_length: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub tag: Tag,
    pub vr: Vr,
    pub value: Value,
}

/// Elements kept in strictly increasing tag order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataSet {
    elements: Vec<Element>,
}

impl DataSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Element> {
        self.elements.iter()
    }

    pub fn get(&self, tag: Tag) -> Option<&Element> {
        self.elements
            .binary_search_by_key(&tag, |e| e.tag)
            .ok()
            .map(|i| &self.elements[i])
    }

    /// Insert or replace, preserving tag order.
    pub fn insert(&mut self, element: Element) {
        match self.elements.binary_search_by_key(&element.tag, |e| e.tag) {
            Ok(i) => self.elements[i] = element,
            Err(i) => self.elements.insert(i, element),
        }
    }

    pub fn remove(&mut self, tag: Tag) -> Option<Element> {
        self.elements
            .binary_search_by_key(&tag, |e| e.tag)
            .ok()
            .map(|i| self.elements.remove(i))
    }

    pub fn bytes(&self, tag: Tag) -> Option<&[u8]> {
        match self.get(tag).map(|e| &e.value) {
            Some(Value::Bytes(b)) => Some(b),
            _ => None,
        }
    }

    pub fn items(&self, tag: Tag) -> Option<&[Item]> {
        match self.get(tag).map(|e| &e.value) {
            Some(Value::Sequence(s)) => Some(&s.items),
            _ => None,
        }
    }

    /// Text value with trailing padding removed. Multi-valued strings are returned whole.
    pub fn string(&self, tag: Tag) -> Option<String> {
        self.bytes(tag).map(|b| {
            String::from_utf8_lossy(b)
                .trim_end_matches(['\0', ' '])
                .trim_start()
                .to_string()
        })
    }

    /// Backslash-separated decimal (DS/IS) values.
    pub fn decimals(&self, tag: Tag) -> Option<Vec<f64>> {
        let text = self.string(tag)?;
        if text.is_empty() {
            return None;
        }
        text.split('\\')
            .map(|part| part.trim().parse::<f64>().ok())
            .collect()
    }

    pub fn u16_values(&self, tag: Tag) -> Option<Vec<u16>> {
        self.bytes(tag).map(|b| {
            b.chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect()
        })
    }

    pub fn first_u16(&self, tag: Tag) -> Option<u16> {
        self.u16_values(tag).and_then(|v| v.first().copied())
    }

    pub fn set_bytes(&mut self, tag: Tag, vr: Vr, mut bytes: Vec<u8>) {
        if bytes.len() % 2 == 1 {
            bytes.push(vr.padding());
        }
        self.insert(Element {
            tag,
            vr,
            value: Value::Bytes(bytes),
        });
    }

    pub fn set_string(&mut self, tag: Tag, vr: Vr, value: &str) {
        self.set_bytes(tag, vr, value.as_bytes().to_vec());
    }

    pub fn set_decimals(&mut self, tag: Tag, values: &[f64]) {
        let text = values
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join("\\");
        self.set_string(tag, Vr::DS, &text);
    }

    pub fn set_u16s(&mut self, tag: Tag, vr: Vr, values: &[u16]) {
        let bytes = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        self.set_bytes(tag, vr, bytes);
    }

    pub fn set_u32(&mut self, tag: Tag, value: u32) {
        self.set_bytes(tag, Vr::UL, value.to_le_bytes().to_vec());
    }

    pub fn set_sequence(&mut self, tag: Tag, items: Vec<DataSet>, undefined_length: bool) {
        let items = items
            .into_iter()
            .map(|elements| Item {
                elements,
                undefined_length,
            })
            .collect();
        self.insert(Element {
            tag,
            vr: Vr::SQ,
            value: Value::Sequence(Sequence {
                items,
                undefined_length,
            }),
        });
    }
}

/// A parsed single-frame grayscale image object.
#[derive(Debug, Clone, PartialEq)]
pub struct DicomObject {
    /// `None` for headerless implicit-VR streams.
    pub preamble: Option<Vec<u8>>,
    pub meta: DataSet,
    pub transfer_syntax: TransferSyntax,
    pub dataset: DataSet,
    pub rows: u16,
    pub cols: u16,
    pub bits_allocated: u16,
    pub bits_stored: u16,
    pub pixel_representation: u16,
    pub photometric: Photometric,
    /// Stored sample values, masked to `bits_stored`, row-major.
    pub pixel_data: Vec<u16>,
}

impl DicomObject {
    /// Stored value of sample `i`, sign-extended when the pixel representation is signed.
    pub fn stored_value(&self, i: usize) -> i32 {
        let raw = self.pixel_data[i] as i32;
        if self.pixel_representation == 1 && self.bits_stored > 0 {
            let sign_bit = 1i32 << (self.bits_stored - 1);
            if raw & sign_bit != 0 {
                return raw - (1i32 << self.bits_stored);
            }
        }
        raw
    }

    pub fn stored_values(&self) -> Vec<i32> {
        (0..self.pixel_data.len()).map(|i| self.stored_value(i)).collect()
    }

    /// (slope, intercept); identity when absent.
    pub fn rescale(&self) -> (f64, f64) {
        let slope = self
            .dataset
            .decimals(tags::RESCALE_SLOPE)
            .and_then(|v| v.first().copied())
            .unwrap_or(1.0);
        let intercept = self
            .dataset
            .decimals(tags::RESCALE_INTERCEPT)
            .and_then(|v| v.first().copied())
            .unwrap_or(0.0);
        (slope, intercept)
    }

    /// Stored values after the modality rescale (Hounsfield units for CT).
    pub fn rescaled_values(&self) -> Vec<f64> {
        let (slope, intercept) = self.rescale();
        (0..self.pixel_data.len())
            .map(|i| self.stored_value(i) as f64 * slope + intercept)
            .collect()
    }

    fn triple(&self, tag: Tag) -> Option<[f64; 3]> {
        let v = self.dataset.decimals(tag)?;
        (v.len() >= 3).then(|| [v[0], v[1], v[2]])
    }

    pub fn image_position(&self) -> Option<[f64; 3]> {
        self.triple(tags::IMAGE_POSITION_PATIENT)
    }

    pub fn image_orientation(&self) -> Option<[f64; 6]> {
        let v = self.dataset.decimals(tags::IMAGE_ORIENTATION_PATIENT)?;
        (v.len() >= 6).then(|| [v[0], v[1], v[2], v[3], v[4], v[5]])
    }

    /// (row spacing, column spacing) in mm.
    pub fn pixel_spacing(&self) -> Option<[f64; 2]> {
        let v = self.dataset.decimals(tags::PIXEL_SPACING)?;
        (v.len() >= 2).then(|| [v[0], v[1]])
    }

    pub fn view_position(&self) -> Option<String> {
        self.dataset.string(tags::VIEW_POSITION)
    }

    pub fn patient_id(&self) -> Option<String> {
        self.dataset.string(tags::PATIENT_ID)
    }

    pub fn study_uid(&self) -> Option<String> {
        self.dataset.string(tags::STUDY_INSTANCE_UID)
    }

    pub fn series_uid(&self) -> Option<String> {
        self.dataset.string(tags::SERIES_INSTANCE_UID)
    }

    pub fn sop_instance_uid(&self) -> Option<String> {
        self.dataset.string(tags::SOP_INSTANCE_UID)
    }

    pub fn modality(&self) -> Option<String> {
        self.dataset.string(tags::MODALITY)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept streams with no preamble/meta group, decoding them as implicit VR little endian.
    pub headerless_implicit: bool,
}

pub fn parse_dicom(bytes: &[u8]) -> Result<DicomObject, DicomError> {
    parse_dicom_with(bytes, ParseOptions::default())
}

pub fn parse_dicom_with(bytes: &[u8], options: ParseOptions) -> Result<DicomObject, DicomError> {
    let has_magic = bytes.len() >= PREAMBLE_LEN + 4 && &bytes[PREAMBLE_LEN..PREAMBLE_LEN + 4] == MAGIC;
    let (preamble, meta, transfer_syntax, body_start) = if has_magic {
        let mut reader = Reader::new(bytes, PREAMBLE_LEN + 4);
        let meta = reader.parse_meta()?;
        let uid = meta
            .string(tags::TRANSFER_SYNTAX_UID)
            .ok_or(DicomError::MissingRequiredTag(tags::TRANSFER_SYNTAX_UID))?;
        let ts = TransferSyntax::from_uid(&uid)?;
        (Some(bytes[..PREAMBLE_LEN].to_vec()), meta, ts, reader.pos)
    } else if options.headerless_implicit {
        (None, DataSet::new(), TransferSyntax::ImplicitVrLittleEndian, 0)
    } else {
        return Err(DicomError::NotDicom);
    };

    let mut reader = Reader::new(bytes, body_start);
    let dataset = reader.parse_dataset(transfer_syntax.is_explicit(), None, false)?;
    decode_image(preamble, meta, transfer_syntax, dataset)
}

fn decode_image(
    preamble: Option<Vec<u8>>,
    meta: DataSet,
    transfer_syntax: TransferSyntax,
    dataset: DataSet,
) -> Result<DicomObject, DicomError> {
    let rows = dataset
        .first_u16(tags::ROWS)
        .ok_or(DicomError::MissingRequiredTag(tags::ROWS))?;
    let cols = dataset
        .first_u16(tags::COLUMNS)
        .ok_or(DicomError::MissingRequiredTag(tags::COLUMNS))?;
    let pixel_bytes = dataset
        .bytes(tags::PIXEL_DATA)
        .ok_or(DicomError::MissingRequiredTag(tags::PIXEL_DATA))?;
    if let Some(spp) = dataset.first_u16(tags::SAMPLES_PER_PIXEL) {
        if spp != 1 {
            return Err(DicomError::UnsupportedImage(format!("{spp} samples per pixel")));
        }
    }
    let photometric = match dataset.string(tags::PHOTOMETRIC_INTERPRETATION).as_deref() {
        Some("MONOCHROME1") => Photometric::Monochrome1,
        Some("MONOCHROME2") | None => Photometric::Monochrome2,
        Some(other) => {
            return Err(DicomError::UnsupportedImage(format!(
                "photometric interpretation {other}"
            )))
        }
    };
    let bits_allocated = dataset.first_u16(tags::BITS_ALLOCATED).unwrap_or(16);
    let bits_stored = dataset.first_u16(tags::BITS_STORED).unwrap_or(bits_allocated);
    let pixel_representation = dataset.first_u16(tags::PIXEL_REPRESENTATION).unwrap_or(0);
    if bits_stored == 0 || bits_stored > bits_allocated {
        return Err(DicomError::UnsupportedImage(format!(
            "bits stored {bits_stored} with bits allocated {bits_allocated}"
        )));
    }
    let count = rows as usize * cols as usize;
    let mask: u32 = (1u32 << bits_stored) - 1;
    let pixel_data: Vec<u16> = match bits_allocated {
        16 => {
            if pixel_bytes.len() < count * 2 {
                return Err(DicomError::Malformed {
                    offset: 0,
                    reason: format!(
                        "pixel data holds {} bytes, {rows}x{cols} needs {}",
                        pixel_bytes.len(),
                        count * 2
                    ),
                });
            }
            pixel_bytes[..count * 2]
                .chunks_exact(2)
                .map(|c| (u16::from_le_bytes([c[0], c[1]]) as u32 & mask) as u16)
                .collect()
        }
        8 => {
            if pixel_bytes.len() < count {
                return Err(DicomError::Malformed {
                    offset: 0,
                    reason: format!(
                        "pixel data holds {} bytes, {rows}x{cols} needs {count}",
                        pixel_bytes.len()
                    ),
                });
            }
            pixel_bytes[..count]
                .iter()
                .map(|&b| (b as u32 & mask) as u16)
                .collect()
        }
        other => {
            return Err(DicomError::UnsupportedImage(format!(
                "bits allocated {other}"
            )))
        }
    };
    Ok(DicomObject {
        preamble,
        meta,
        transfer_syntax,
        dataset,
        rows,
        cols,
        bits_allocated,
        bits_stored,
        pixel_representation,
        photometric,
        pixel_data,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], pos: usize) -> Self {
        Self { bytes, pos }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DicomError> {
        if self.bytes.len() < self.pos + n {
            return Err(DicomError::TruncatedStream {
                offset: self.pos,
                needed: self.pos + n - self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, DicomError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, DicomError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tag(&mut self) -> Result<Tag, DicomError> {
        Ok(Tag(self.u16()?, self.u16()?))
    }

    fn peek_group(&self) -> Option<u16> {
        self.bytes
            .get(self.pos..self.pos + 2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn malformed(&self, reason: impl Into<String>) -> DicomError {
        DicomError::Malformed {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn parse_meta(&mut self) -> Result<DataSet, DicomError> {
        let mut meta = DataSet::new();
        let mut previous: Option<Tag> = None;
        while self.peek_group() == Some(0x0002) {
            let element = self.parse_element(true)?;
            check_order(&mut previous, element.tag)?;
            meta.elements.push(element);
        }
        Ok(meta)
    }

    fn parse_dataset(
        &mut self,
        explicit: bool,
        end: Option<usize>,
        in_undefined_item: bool,
    ) -> Result<DataSet, DicomError> {
        let mut set = DataSet::new();
        let mut previous: Option<Tag> = None;
        loop {
            match end {
                Some(end) if self.pos >= end => {
                    if self.pos > end {
                        return Err(self.malformed("element overruns its enclosing item"));
                    }
                    break;
                }
                None if self.pos >= self.bytes.len() => {
                    if in_undefined_item {
                        return Err(DicomError::TruncatedStream {
                            offset: self.pos,
                            needed: 8,
                        });
                    }
                    break;
                }
                _ => {}
            }
            if in_undefined_item {
                let save = self.pos;
                let tag = self.tag()?;
                if tag == tags::ITEM_DELIMITATION {
                    self.u32()?;
                    return Ok(set);
                }
                self.pos = save;
            }
            let element = self.parse_element(explicit)?;
            check_order(&mut previous, element.tag)?;
            set.elements.push(element);
        }
        Ok(set)
    }

    fn parse_element(&mut self, explicit: bool) -> Result<Element, DicomError> {
        let tag = self.tag()?;
        if tag.group() == 0xFFFE {
            return Err(self.malformed(format!("unexpected delimiter {tag} in data set")));
        }
        let (vr, length) = if explicit {
            let code = self.take(2)?;
            let vr = Vr([code[0], code[1]]);
            if !vr.0.iter().all(|c| c.is_ascii_uppercase()) {
                return Err(self.malformed(format!("invalid VR bytes for {tag}")));
            }
            if vr.has_long_length() {
                self.take(2)?;
                (vr, self.u32()?)
            } else {
                (vr, self.u16()? as u32)
            }
        } else {
            (dictionary_vr(tag), self.u32()?)
        };

        if length == UNDEFINED_LENGTH {
            if tag == tags::PIXEL_DATA {
                return Err(DicomError::UnsupportedTransferSyntax(
                    "encapsulated pixel data".to_string(),
                ));
            }
            if vr != Vr::SQ && explicit {
                return Err(self.malformed(format!("undefined length on non-sequence {tag} {vr}")));
            }
            let items = self.parse_items(explicit, None)?;
            return Ok(Element {
                tag,
                vr: Vr::SQ,
                value: Value::Sequence(Sequence {
                    items,
                    undefined_length: true,
                }),
            });
        }

        let length = length as usize;
        if vr == Vr::SQ {
            let end = self.pos + length;
            if end > self.bytes.len() {
                return Err(DicomError::TruncatedStream {
                    offset: self.pos,
                    needed: end - self.bytes.len(),
                });
            }
            let items = self.parse_items(explicit, Some(end))?;
            return Ok(Element {
                tag,
                vr,
                value: Value::Sequence(Sequence {
                    items,
                    undefined_length: false,
                }),
            });
        }
        let bytes = self.take(length)?.to_vec();
        Ok(Element {
            tag,
            vr,
            value: Value::Bytes(bytes),
        })
    }

    fn parse_items(&mut self, explicit: bool, end: Option<usize>) -> Result<Vec<Item>, DicomError> {
        let mut items = Vec::new();
        loop {
            if let Some(end) = end {
                if self.pos >= end {
                    if self.pos > end {
                        return Err(self.malformed("item overruns its sequence"));
                    }
                    break;
                }
            }
            let tag = self.tag()?;
            let length = self.u32()?;
            if tag == tags::SEQUENCE_DELIMITATION {
                if end.is_some() {
                    return Err(self.malformed("sequence delimiter inside defined-length sequence"));
                }
                break;
            }
            if tag != tags::ITEM {
                return Err(self.malformed(format!("expected item tag, found {tag}")));
            }
            if length == UNDEFINED_LENGTH {
                let elements = self.parse_dataset(explicit, None, true)?;
                items.push(Item {
                    elements,
                    undefined_length: true,
                });
            } else {
                let item_end = self.pos + length as usize;
                if item_end > self.bytes.len() {
                    return Err(DicomError::TruncatedStream {
                        offset: self.pos,
                        needed: item_end - self.bytes.len(),
                    });
                }
                let elements = self.parse_dataset(explicit, Some(item_end), false)?;
                items.push(Item {
                    elements,
                    undefined_length: false,
                });
            }
        }
        Ok(items)
    }
}

fn check_order(previous: &mut Option<Tag>, current: Tag) -> Result<(), DicomError> {
    if let Some(prev) = *previous {
        if current <= prev {
            return Err(DicomError::TagOrder {
                previous: prev,
                current,
            });
        }
    }
    *previous = Some(current);
    Ok(())
}

/// Serialize an object in its own transfer syntax.
pub fn write_dicom(obj: &DicomObject) -> Vec<u8> {
    let mut out = Vec::new();
    if let Some(preamble) = &obj.preamble {
        out.extend_from_slice(preamble);
        out.extend_from_slice(MAGIC);
        write_dataset(&mut out, &obj.meta, true);
    }
    write_dataset(&mut out, &obj.dataset, obj.transfer_syntax.is_explicit());
    out
}

fn write_dataset(out: &mut Vec<u8>, set: &DataSet, explicit: bool) {
    for element in set.iter() {
        write_element(out, element, explicit);
    }
}

fn write_tag(out: &mut Vec<u8>, tag: Tag) {
    out.extend_from_slice(&tag.group().to_le_bytes());
    out.extend_from_slice(&tag.element().to_le_bytes());
}

fn write_header(out: &mut Vec<u8>, tag: Tag, vr: Vr, length: u32, explicit: bool) {
    write_tag(out, tag);
    if explicit {
        out.extend_from_slice(&vr.0);
        if vr.has_long_length() {
            out.extend_from_slice(&[0, 0]);
            out.extend_from_slice(&length.to_le_bytes());
        } else {
            out.extend_from_slice(&(length as u16).to_le_bytes());
        }
    } else {
        out.extend_from_slice(&length.to_le_bytes());
    }
}

fn write_element(out: &mut Vec<u8>, element: &Element, explicit: bool) {
    match &element.value {
        Value::Bytes(bytes) => {
            write_header(out, element.tag, element.vr, bytes.len() as u32, explicit);
            out.extend_from_slice(bytes);
        }
        Value::Sequence(seq) => {
            let mut body = Vec::new();
            for item in &seq.items {
                write_item(&mut body, item, explicit);
            }
            if seq.undefined_length {
                write_header(out, element.tag, Vr::SQ, UNDEFINED_LENGTH, explicit);
                out.extend_from_slice(&body);
                write_tag(out, tags::SEQUENCE_DELIMITATION);
                out.extend_from_slice(&0u32.to_le_bytes());
            } else {
                write_header(out, element.tag, Vr::SQ, body.len() as u32, explicit);
                out.extend_from_slice(&body);
            }
        }
    }
}

fn write_item(out: &mut Vec<u8>, item: &Item, explicit: bool) {
    let mut body = Vec::new();
    write_dataset(&mut body, &item.elements, explicit);
    write_tag(out, tags::ITEM);
    if item.undefined_length {
        out.extend_from_slice(&UNDEFINED_LENGTH.to_le_bytes());
        out.extend_from_slice(&body);
        write_tag(out, tags::ITEM_DELIMITATION);
        out.extend_from_slice(&0u32.to_le_bytes());
    } else {
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
    }
}

/// Assembles canonical Part-10 streams: fixtures, synthetic studies, tests.
#[derive(Debug, Clone)]
pub struct DicomBuilder {
    transfer_syntax: TransferSyntax,
    headerless: bool,
    dataset: DataSet,
}

impl DicomBuilder {
    pub fn new(transfer_syntax: TransferSyntax) -> Self {
        Self {
            transfer_syntax,
            headerless: false,
            dataset: DataSet::new(),
        }
    }

    /// Implicit VR little endian with no preamble or meta group.
    pub fn headerless() -> Self {
        Self {
            transfer_syntax: TransferSyntax::ImplicitVrLittleEndian,
            headerless: true,
            dataset: DataSet::new(),
        }
    }

    pub fn string(mut self, tag: Tag, vr: Vr, value: &str) -> Self {
        self.dataset.set_string(tag, vr, value);
        self
    }

    pub fn decimals(mut self, tag: Tag, values: &[f64]) -> Self {
        self.dataset.set_decimals(tag, values);
        self
    }

    pub fn u16s(mut self, tag: Tag, vr: Vr, values: &[u16]) -> Self {
        self.dataset.set_u16s(tag, vr, values);
        self
    }

    pub fn bytes(mut self, tag: Tag, vr: Vr, bytes: Vec<u8>) -> Self {
        self.dataset.set_bytes(tag, vr, bytes);
        self
    }

    pub fn sequence(mut self, tag: Tag, items: Vec<DataSet>, undefined_length: bool) -> Self {
        self.dataset.set_sequence(tag, items, undefined_length);
        self
    }

    pub fn photometric(self, photometric: Photometric) -> Self {
        self.string(tags::PHOTOMETRIC_INTERPRETATION, Vr::CS, photometric.code())
    }

    pub fn rescale(self, slope: f64, intercept: f64) -> Self {
        self.decimals(tags::RESCALE_INTERCEPT, &[intercept])
            .decimals(tags::RESCALE_SLOPE, &[slope])
    }

    pub fn window(self, center: f64, width: f64) -> Self {
        self.decimals(tags::WINDOW_CENTER, &[center])
            .decimals(tags::WINDOW_WIDTH, &[width])
    }

    /// One VOI LUT item per entry of `luts`: (first mapped value, 16-bit table).
    pub fn voi_luts(self, luts: &[(i32, Vec<u16>)]) -> Self {
        let items = luts
            .iter()
            .map(|(first, table)| {
                let mut item = DataSet::new();
                let entries = if table.len() == 65536 { 0 } else { table.len() as u16 };
                item.set_u16s(tags::LUT_DESCRIPTOR, Vr::US, &[entries, *first as u16, 16]);
                item.set_u16s(tags::LUT_DATA, Vr::OW, table);
                item
            })
            .collect();
        self.sequence(tags::VOI_LUT_SEQUENCE, items, false)
    }

    /// 16-bit unsigned pixel data plus the attributes that describe it.
    pub fn pixels(mut self, rows: u16, cols: u16, bits_stored: u16, samples: &[u16]) -> Self {
        assert_eq!(samples.len(), rows as usize * cols as usize, "sample count must be rows*cols");
        self.dataset.set_u16s(tags::SAMPLES_PER_PIXEL, Vr::US, &[1]);
        if self.dataset.get(tags::PHOTOMETRIC_INTERPRETATION).is_none() {
            self.dataset
                .set_string(tags::PHOTOMETRIC_INTERPRETATION, Vr::CS, "MONOCHROME2");
        }
        self.dataset.set_u16s(tags::ROWS, Vr::US, &[rows]);
        self.dataset.set_u16s(tags::COLUMNS, Vr::US, &[cols]);
        self.dataset.set_u16s(tags::BITS_ALLOCATED, Vr::US, &[16]);
        self.dataset.set_u16s(tags::BITS_STORED, Vr::US, &[bits_stored]);
        self.dataset.set_u16s(tags::HIGH_BIT, Vr::US, &[bits_stored - 1]);
        if self.dataset.get(tags::PIXEL_REPRESENTATION).is_none() {
            self.dataset.set_u16s(tags::PIXEL_REPRESENTATION, Vr::US, &[0]);
        }
        self.dataset.set_u16s(tags::PIXEL_DATA, Vr::OW, samples);
        self
    }

    /// Signed 16-bit pixel data (CT style).
    pub fn signed_pixels(mut self, rows: u16, cols: u16, samples: &[i16]) -> Self {
        self.dataset.set_u16s(tags::PIXEL_REPRESENTATION, Vr::US, &[1]);
        let raw: Vec<u16> = samples.iter().map(|&s| s as u16).collect();
        self.pixels(rows, cols, 16, &raw)
    }

    fn meta(&self) -> DataSet {
        let mut meta = DataSet::new();
        meta.set_bytes(tags::FILE_META_VERSION, Vr::OB, vec![0, 1]);
        let class = self
            .dataset
            .string(tags::SOP_CLASS_UID)
            .unwrap_or_else(|| "1.2.840.10008.5.1.4.1.1.7".to_string());
        meta.set_string(tags::MEDIA_STORAGE_SOP_CLASS_UID, Vr::UI, &class);
        if let Some(instance) = self.dataset.string(tags::SOP_INSTANCE_UID) {
            meta.set_string(tags::MEDIA_STORAGE_SOP_INSTANCE_UID, Vr::UI, &instance);
        }
        meta.set_string(tags::TRANSFER_SYNTAX_UID, Vr::UI, self.transfer_syntax.uid());
        let mut body = Vec::new();
        write_dataset(&mut body, &meta, true);
        meta.set_u32(tags::FILE_META_GROUP_LENGTH, body.len() as u32);
        meta
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        if !self.headerless {
            out.extend_from_slice(&[0u8; PREAMBLE_LEN]);
            out.extend_from_slice(MAGIC);
            write_dataset(&mut out, &self.meta(), true);
        }
        write_dataset(&mut out, &self.dataset, self.transfer_syntax.is_explicit());
        out
    }

    pub fn build(&self) -> Result<DicomObject, DicomError> {
        parse_dicom_with(
            &self.to_bytes(),
            ParseOptions {
                headerless_implicit: self.headerless,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> DicomBuilder {
        DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian)
            .string(tags::SOP_INSTANCE_UID, Vr::UI, "1.2.3.4")
            .string(tags::PATIENT_ID, Vr::LO, "P1")
            .pixels(2, 2, 16, &[0, 1, 2, 3])
    }

    #[test]
    fn parses_minimal_explicit_file() {
        let obj = minimal().build().unwrap();
        assert_eq!(obj.rows, 2);
        assert_eq!(obj.cols, 2);
        assert_eq!(obj.pixel_data, vec![0, 1, 2, 3]);
        assert_eq!(obj.transfer_syntax, TransferSyntax::ExplicitVrLittleEndian);
        assert_eq!(obj.patient_id().as_deref(), Some("P1"));
        assert_eq!(obj.photometric, Photometric::Monochrome2);
    }

    #[test]
    fn round_trips_byte_identical() {
        let bytes = minimal()
            .voi_luts(&[(0, vec![0, 10, 20]), (5, vec![1, 2])])
            .window(40.0, 400.0)
            .to_bytes();
        let obj = parse_dicom(&bytes).unwrap();
        assert_eq!(write_dicom(&obj), bytes);
    }

    #[test]
    fn undefined_length_sequences_round_trip() {
        let mut item = DataSet::new();
        item.set_u16s(tags::LUT_DESCRIPTOR, Vr::US, &[2, 0, 16]);
        item.set_u16s(tags::LUT_DATA, Vr::OW, &[7, 9]);
        for ts in [TransferSyntax::ExplicitVrLittleEndian, TransferSyntax::ImplicitVrLittleEndian] {
            let bytes = DicomBuilder::new(ts)
                .sequence(tags::VOI_LUT_SEQUENCE, vec![item.clone()], true)
                .pixels(1, 2, 12, &[4, 5])
                .to_bytes();
            let obj = parse_dicom(&bytes).unwrap();
            assert_eq!(obj.dataset.items(tags::VOI_LUT_SEQUENCE).unwrap().len(), 1);
            assert_eq!(write_dicom(&obj), bytes);
        }
    }

    #[test]
    fn headerless_implicit_requires_flag() {
        let bytes = DicomBuilder::headerless().pixels(1, 1, 16, &[42]).to_bytes();
        assert_eq!(parse_dicom(&bytes).unwrap_err(), DicomError::NotDicom);
        let obj = parse_dicom_with(&bytes, ParseOptions { headerless_implicit: true }).unwrap();
        assert_eq!(obj.pixel_data, vec![42]);
        assert!(obj.preamble.is_none());
        assert_eq!(write_dicom(&obj), bytes);
    }

    #[test]
    fn compressed_syntax_rejected() {
        let mut bytes = minimal().to_bytes();
        let explicit = TransferSyntax::EXPLICIT_LE_UID.as_bytes();
        // Same length JPEG baseline UID keeps the meta group length valid.
        let jpeg = b"1.2.840.10008.1.2.4.50";
        let pos = bytes.windows(explicit.len()).position(|w| w == explicit).unwrap();
        let len_pos = pos - 2;
        let new_len = (jpeg.len() as u16).to_le_bytes();
        bytes.splice(pos..pos + explicit.len() + 1, jpeg.iter().copied());
        bytes[len_pos] = new_len[0];
        bytes[len_pos + 1] = new_len[1];
        match parse_dicom(&bytes) {
            Err(DicomError::UnsupportedTransferSyntax(uid)) => assert_eq!(uid, "1.2.840.10008.1.2.4.50"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn encapsulated_pixel_data_rejected() {
        let mut bytes = DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian)
            .u16s(tags::ROWS, Vr::US, &[1])
            .u16s(tags::COLUMNS, Vr::US, &[1])
            .to_bytes();
        write_tag(&mut bytes, tags::PIXEL_DATA);
        bytes.extend_from_slice(b"OB\0\0");
        bytes.extend_from_slice(&UNDEFINED_LENGTH.to_le_bytes());
        write_tag(&mut bytes, tags::ITEM);
        bytes.extend_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            parse_dicom(&bytes),
            Err(DicomError::UnsupportedTransferSyntax(_))
        ));
    }

    #[test]
    fn truncation_and_missing_tags() {
        let bytes = minimal().to_bytes();
        assert!(matches!(
            parse_dicom(&bytes[..bytes.len() - 3]),
            Err(DicomError::TruncatedStream { .. })
        ));
        let no_pixels = DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian)
            .u16s(tags::ROWS, Vr::US, &[1])
            .u16s(tags::COLUMNS, Vr::US, &[1])
            .to_bytes();
        assert_eq!(
            parse_dicom(&no_pixels).unwrap_err(),
            DicomError::MissingRequiredTag(tags::PIXEL_DATA)
        );
    }

    #[test]
    fn out_of_order_tags_rejected() {
        let mut bytes = minimal().to_bytes();
        // Append an element whose tag precedes pixel data.
        write_tag(&mut bytes, tags::PATIENT_ID);
        bytes.extend_from_slice(b"LO");
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(b"P2");
        assert!(matches!(parse_dicom(&bytes), Err(DicomError::TagOrder { .. })));
    }

    #[test]
    fn signed_samples_and_bit_masking() {
        let obj = DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian)
            .signed_pixels(1, 3, &[-1024, 0, 1500])
            .rescale(1.0, 0.0)
            .build()
            .unwrap();
        assert_eq!(obj.stored_values(), vec![-1024, 0, 1500]);
        let masked = DicomBuilder::new(TransferSyntax::ExplicitVrLittleEndian)
            .pixels(1, 1, 12, &[0xF123])
            .build()
            .unwrap();
        assert_eq!(masked.pixel_data, vec![0x0123]);
    }

    #[test]
    fn unsupported_photometric() {
        let err = minimal()
            .string(tags::PHOTOMETRIC_INTERPRETATION, Vr::CS, "RGB")
            .build()
            .unwrap_err();
        assert!(matches!(err, DicomError::UnsupportedImage(_)));
    }
}
