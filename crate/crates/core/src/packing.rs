//! Packing of A and B into micro-panel order, and the pre-packed weight file.
//!
//! An Ac buffer holds an mc×kc block of A as ⌈mc/mr⌉ micro-panels Ar. Inside
//! a panel the mr entries of one k index are contiguous (element `(i, p)` of
//! the panel at `p·mr + i`), so the micro-kernel walks each panel with unit
//! stride. Bc is the mirror image: ⌈nc/nr⌉ panels Br of kc×nr with element
//! `(p, j)` at `p·nr + j`. Partial panels at matrix edges are zero-filled.
//!
//! # Pre-packed weight file
//!
//! Little-endian. An 8-byte ASCII magic `GEMMPKA1`, then seven `u32` fields
//! `version` (1), `dtype` (0 = INT16), `m`, `k`, `mc`, `kc`, `mr`, then
//! every Ac block in (pc, ic) order as raw `i16` payload of
//! ⌈mc_eff/mr⌉·mr·kc_eff elements, with no padding between blocks.

use std::io::{Read, Write};

use crate::matrix::{BlockParams, DType, Int16Matrix, ProblemDims};
use crate::{Error, Result};

pub const PREPACK_MAGIC: &[u8; 8] = b"GEMMPKA1";
pub const PREPACK_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 7 * 4;

/// One packed mc×kc block of A.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcBlock {
    /// First row of A covered by the block.
    pub ic: usize,
    /// First column of A covered by the block.
    pub pc: usize,
    pub mc_eff: usize,
    pub kc_eff: usize,
    pub mr: usize,
    pub payload: Vec<i16>,
}

impl AcBlock {
    pub fn panel_count(&self) -> usize {
        self.mc_eff.div_ceil(self.mr)
    }

    /// Micro-panel `r`, `mr·kc_eff` elements.
    pub fn panel(&self, r: usize) -> &[i16] {
        let len = self.mr * self.kc_eff;
        &self.payload[r * len..(r + 1) * len]
    }

    /// Restores the source sub-block, dropping padding.
    pub fn unpack(&self) -> Int16Matrix {
        let mr = self.mr;
        Int16Matrix::from_fn(self.mc_eff, self.kc_eff, |i, p| self.panel(i / mr)[p * mr + i % mr])
    }
}

/// One packed kc×nc block of B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BcBlock {
    pub pc: usize,
    pub jc: usize,
    pub kc_eff: usize,
    pub nc_eff: usize,
    pub nr: usize,
    pub payload: Vec<i16>,
}

impl BcBlock {
    pub fn panel_count(&self) -> usize {
        self.nc_eff.div_ceil(self.nr)
    }

    /// Micro-panel `j`, `kc_eff·nr` elements.
    pub fn panel(&self, j: usize) -> &[i16] {
        let len = self.nr * self.kc_eff;
        &self.payload[j * len..(j + 1) * len]
    }

    pub fn unpack(&self) -> Int16Matrix {
        let nr = self.nr;
        Int16Matrix::from_fn(self.kc_eff, self.nc_eff, |p, j| self.panel(j / nr)[p * nr + j % nr])
    }
}

/// Packs `A[ic..ic+mc, pc..pc+kc]` (clamped at the edges) into an Ac buffer.
pub fn pack_ac(a: &Int16Matrix, ic: usize, pc: usize, mc: usize, kc: usize, mr: usize) -> Result<AcBlock> {
    let (m, k) = a.shape();
    if ic >= m || pc >= k {
        return Err(Error::invalid(format!("Ac offset ({ic}, {pc}) outside {m}x{k} matrix")));
    }
    if mc == 0 || kc == 0 || mr == 0 {
        return Err(Error::invalid("mc, kc and mr must be positive"));
    }
    let mc_eff = mc.min(m - ic);
    let kc_eff = kc.min(k - pc);
    let panels = mc_eff.div_ceil(mr);
    let mut payload = vec![0i16; panels * mr * kc_eff];
    for (r, panel) in payload.chunks_exact_mut(mr * kc_eff).enumerate() {
        let rows = mr.min(mc_eff - r * mr);
        for i in 0..rows {
            let src = &a.row(ic + r * mr + i)[pc..pc + kc_eff];
            for (p, &v) in src.iter().enumerate() {
                panel[p * mr + i] = v;
            }
        }
    }
    Ok(AcBlock {
        ic,
        pc,
        mc_eff,
        kc_eff,
        mr,
        payload,
    })
}

/// Packs `B[pc..pc+kc, jc..jc+nc]` (clamped at the edges) into a Bc buffer.
pub fn pack_bc(b: &Int16Matrix, pc: usize, jc: usize, kc: usize, nc: usize, nr: usize) -> Result<BcBlock> {
    let (k, n) = b.shape();
    if pc >= k || jc >= n {
        return Err(Error::invalid(format!("Bc offset ({pc}, {jc}) outside {k}x{n} matrix")));
    }
    if kc == 0 || nc == 0 || nr == 0 {
        return Err(Error::invalid("kc, nc and nr must be positive"));
    }
    let kc_eff = kc.min(k - pc);
    let nc_eff = nc.min(n - jc);
    let panels = nc_eff.div_ceil(nr);
    let mut payload = vec![0i16; panels * nr * kc_eff];
    for (jp, panel) in payload.chunks_exact_mut(nr * kc_eff).enumerate() {
        let j0 = jc + jp * nr;
        let cols = nr.min(nc_eff - jp * nr);
        for p in 0..kc_eff {
            panel[p * nr..p * nr + cols].copy_from_slice(&b.row(pc + p)[j0..j0 + cols]);
        }
    }
    Ok(BcBlock {
        pc,
        jc,
        kc_eff,
        nc_eff,
        nr,
        payload,
    })
}

/// All Ac blocks of a weight matrix, packed ahead of time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedA {
    pub m: usize,
    pub k: usize,
    pub mc: usize,
    pub kc: usize,
    pub mr: usize,
    pub dtype: DType,
    /// Ordered pc-major, then ic.
    pub blocks: Vec<AcBlock>,
}

impl PackedA {
    pub fn k_blocks(&self) -> usize {
        self.k.div_ceil(self.kc)
    }

    pub fn m_blocks(&self) -> usize {
        self.m.div_ceil(self.mc)
    }

    /// Block covering k-slab `pc_index` and row block `ic_index`.
    pub fn block(&self, pc_index: usize, ic_index: usize) -> &AcBlock {
        &self.blocks[pc_index * self.m_blocks() + ic_index]
    }

    pub fn payload_elements(&self) -> usize {
        self.blocks.iter().map(|b| b.payload.len()).sum()
    }

    pub fn payload_bytes(&self) -> usize {
        self.payload_elements() * self.dtype.elem_bytes()
    }

    /// Largest single Ac buffer, in bytes.
    pub fn max_block_bytes(&self) -> usize {
        self.blocks.iter().map(|b| b.payload.len()).max().unwrap_or(0) * self.dtype.elem_bytes()
    }

    /// Whether this packing was produced for the given problem and blocking.
    pub fn matches(&self, dims: &ProblemDims, params: &BlockParams) -> bool {
        self.m == dims.m && self.k == dims.k && self.mc == params.mc && self.kc == params.kc && self.mr == params.mr
    }
}

/// Packs all of A into Ac blocks, pc-major.
pub fn prepack_a(a: &Int16Matrix, dims: &ProblemDims, params: &BlockParams) -> Result<PackedA> {
    if a.shape() != (dims.m, dims.k) {
        return Err(Error::invalid(format!(
            "A is {:?}, expected {}x{}",
            a.shape(),
            dims.m,
            dims.k
        )));
    }
    let mut blocks = Vec::with_capacity(dims.k.div_ceil(params.kc) * dims.m.div_ceil(params.mc));
    for pc in (0..dims.k).step_by(params.kc) {
        for ic in (0..dims.m).step_by(params.mc) {
            blocks.push(pack_ac(a, ic, pc, params.mc, params.kc, params.mr)?);
        }
    }
    Ok(PackedA {
        m: dims.m,
        k: dims.k,
        mc: params.mc,
        kc: params.kc,
        mr: params.mr,
        dtype: DType::Int16,
        blocks,
    })
}

/// Writes `packed` in the pre-packed weight file format.
pub fn serialize_prepacked(packed: &PackedA, mut sink: impl Write) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + packed.payload_bytes());
    buf.extend_from_slice(PREPACK_MAGIC);
    for field in [
        PREPACK_VERSION,
        packed.dtype.code(),
        u32_field(packed.m, "m")?,
        u32_field(packed.k, "k")?,
        u32_field(packed.mc, "mc")?,
        u32_field(packed.kc, "kc")?,
        u32_field(packed.mr, "mr")?,
    ] {
        buf.extend_from_slice(&field.to_le_bytes());
    }
    for block in &packed.blocks {
        for v in &block.payload {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    sink.write_all(&buf)?;
    Ok(())
}

fn u32_field(v: usize, name: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{name}={v} does not fit the file format")))
}

/// Reads a pre-packed weight file.
pub fn deserialize_prepacked(mut source: impl Read) -> Result<PackedA> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    prepacked_from_bytes(&bytes)
}

pub fn prepacked_from_bytes(bytes: &[u8]) -> Result<PackedA> {
    let fail = |offset: usize, message: String| Error::Format {
        offset: offset as u64,
        message,
    };
    if bytes.len() < PREPACK_MAGIC.len() || &bytes[..8] != PREPACK_MAGIC {
        return Err(fail(0, "bad magic, expected GEMMPKA1".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(fail(bytes.len(), format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len())));
    }
    let field = |i: usize| {
        let at = 8 + 4 * i;
        (at, u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")))
    };
    let (at, version) = field(0);
    if version != PREPACK_VERSION {
        return Err(fail(at, format!("unsupported version {version}")));
    }
    let (at, code) = field(1);
    let dtype = match DType::from_code(code) {
        Some(DType::Int16) => DType::Int16,
        _ => return Err(fail(at, format!("unsupported dtype code {code}"))),
    };
    let mut dims = [0usize; 5];
    for (i, (slot, name)) in dims.iter_mut().zip(["m", "k", "mc", "kc", "mr"]).enumerate() {
        let (at, v) = field(2 + i);
        if v == 0 {
            return Err(fail(at, format!("{name} must be positive")));
        }
        *slot = v as usize;
    }
    let [m, k, mc, kc, mr] = dims;

    let mut offset = HEADER_LEN;
    let mut blocks = Vec::new();
    for pc in (0..k).step_by(kc) {
        for ic in (0..m).step_by(mc) {
            let mc_eff = mc.min(m - ic);
            let kc_eff = kc.min(k - pc);
            let len = mc_eff.div_ceil(mr) * mr * kc_eff;
            let end = offset + 2 * len;
            if end > bytes.len() {
                return Err(fail(
                    bytes.len(),
                    format!("truncated payload: block (pc={pc}, ic={ic}) needs bytes {offset}..{end}"),
                ));
            }
            let payload = bytes[offset..end]
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]))
                .collect();
            blocks.push(AcBlock {
                ic,
                pc,
                mc_eff,
                kc_eff,
                mr,
                payload,
            });
            offset = end;
        }
    }
    if offset != bytes.len() {
        return Err(fail(offset, format!("{} trailing bytes after last block", bytes.len() - offset)));
    }
    Ok(PackedA {
        m,
        k,
        mc,
        kc,
        mr,
        dtype,
        blocks,
    })
}
