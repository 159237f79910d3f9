//! Grayscale images, boundary padding, PGM I/O and quality metrics.

use crate::error::{arg_err, dim_err, Error, Result};
use crate::tensor::Matrix;
use std::io::{BufRead, BufReader, Read, Write};

/// PSNR reported for identical images instead of infinity.
pub const PSNR_CAP: f64 = 300.0;

/// Row-major grayscale image with intensities in `[0, i_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
    i_max: f64,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>, i_max: f64) -> Result<Self> {
        if height == 0 || width == 0 {
            return dim_err(format!("image dimensions must be positive, got {height}x{width}"));
        }
        if pixels.len() != height * width {
            return dim_err(format!("{} pixels for a {height}x{width} image", pixels.len()));
        }
        if !(i_max > 0.0) || !i_max.is_finite() {
            return arg_err(format!("dynamic range must be positive, got {i_max}"));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return arg_err("image intensities must be finite");
        }
        Ok(Self { height, width, pixels, i_max })
    }

    pub fn from_fn(height: usize, width: usize, i_max: f64, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(height, width, pixels, i_max)
    }

    pub fn from_matrix(m: &Matrix, i_max: f64) -> Result<Self> {
        Self::from_fn(m.nrows(), m.ncols(), i_max, |r, c| m[(r, c)])
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_row_slice(self.height, self.width, &self.pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn i_max(&self) -> f64 {
        self.i_max
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }

    /// Intensities projected onto `[0, inf)`.
    pub fn clamp_nonnegative(&self) -> Self {
        Self { pixels: self.pixels.iter().map(|p| p.max(0.0)).collect(), ..self.clone() }
    }

    /// The `h x w` window whose top-left corner is `(top, left)`.
    pub fn window(&self, top: usize, left: usize, h: usize, w: usize) -> Result<Self> {
        if top + h > self.height || left + w > self.width || h == 0 || w == 0 {
            return dim_err(format!("window {h}x{w} at ({top},{left}) exceeds {}x{} image", self.height, self.width));
        }
        Self::from_fn(h, w, self.i_max, |r, c| self.get(top + r, left + c))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return dim_err(format!("images are {}x{} and {}x{}", self.height, self.width, other.height, other.width));
        }
        Ok(())
    }
}

/// Reflects `x` into `0..n`, repeating the edge sample.
fn reflect(x: isize, n: usize) -> usize {
    let n = n as isize;
    let mut x = x;
    loop {
        if x < 0 {
            x = -x - 1;
        } else if x >= n {
            x = 2 * n - x - 1;
        } else {
            return x as usize;
        }
    }
}

/// Edge-inclusive symmetric padding by `p` on every side.
pub fn pad_symmetric(img: &Image, p: usize) -> Result<Image> {
    if p >= img.height.min(img.width) {
        return arg_err(format!("padding {p} too large for a {}x{} image", img.height, img.width));
    }
    let p_ = p as isize;
    Image::from_fn(img.height + 2 * p, img.width + 2 * p, img.i_max, |r, c| {
        img.get(reflect(r as isize - p_, img.height), reflect(c as isize - p_, img.width))
    })
}

/// Removes `p` pixels from every side.
pub fn crop(img: &Image, p: usize) -> Result<Image> {
    if 2 * p >= img.height || 2 * p >= img.width {
        return arg_err(format!("cannot crop {p} from a {}x{} image", img.height, img.width));
    }
    img.window(p, p, img.height - 2 * p, img.width - 2 * p)
}

/// `20 log10(I_max / ||x - ref||_F)`, with [`PSNR_CAP`] for identical images.
pub fn psnr(x: &Image, reference: &Image) -> Result<f64> {
    x.check_same(reference)?;
    let err = dist(&x.pixels, &reference.pixels);
    if err == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((20.0 * (reference.i_max / err).log10()).min(PSNR_CAP))
}

/// `||x - ref||_F / ||ref||_F`.
pub fn relerr(x: &Image, reference: &Image) -> Result<f64> {
    x.check_same(reference)?;
    relerr_values(&x.pixels, &reference.pixels)
}

pub fn relerr_values(x: &[f64], reference: &[f64]) -> Result<f64> {
    if x.len() != reference.len() {
        return dim_err(format!("{} values against {}", x.len(), reference.len()));
    }
    let n = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return arg_err("relative error against a zero reference");
    }
    Ok(dist(x, reference) / n)
}

/// SSIM from whole-image means, variances and covariance.
pub fn ssim_global(x: &Image, reference: &Image) -> Result<f64> {
    x.check_same(reference)?;
    let n = x.pixels.len() as f64;
    let mx = x.pixels.iter().sum::<f64>() / n;
    let my = reference.pixels.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.pixels.iter().zip(&reference.pixels) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    let denom = (n - 1.0).max(1.0);
    let (vx, vy, cxy) = (vx / denom, vy / denom, cxy / denom);
    let c1 = (0.01 * reference.i_max).powi(2);
    let c2 = (0.03 * reference.i_max).powi(2);
    Ok((2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// PGM encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmFormat {
    /// `P2`, ASCII samples.
    Plain,
    /// `P5`, 8- or 16-bit big-endian samples.
    Binary,
}

/// Writes `img` with samples `round(p * maxval / i_max)` clamped to
/// `0..=maxval`. Integer images with `i_max == maxval` round-trip exactly.
pub fn write_pgm(img: &Image, maxval: u16, format: PgmFormat, mut w: impl Write) -> Result<()> {
    if maxval == 0 {
        return arg_err("PGM maxval must be positive");
    }
    let scale = maxval as f64 / img.i_max;
    let samples: Vec<u16> = img.pixels.iter().map(|p| (p * scale).round().clamp(0.0, maxval as f64) as u16).collect();
    let magic = if format == PgmFormat::Plain { "P2" } else { "P5" };
    write!(w, "{magic}\n{} {}\n{maxval}\n", img.width, img.height)?;
    match format {
        PgmFormat::Plain => {
            for row in samples.chunks(img.width) {
                let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        PgmFormat::Binary => {
            let mut buf = Vec::with_capacity(samples.len() * 2);
            for s in samples {
                if maxval < 256 {
                    buf.push(s as u8);
                } else {
                    buf.extend_from_slice(&s.to_be_bytes());
                }
            }
            w.write_all(&buf)?;
        }
    }
    Ok(())
}

/// Reads a `P2` or `P5` image; `i_max` is the file's maxval.
pub fn read_pgm(r: impl Read) -> Result<Image> {
    let mut r = BufReader::new(r);
    let mut header = Vec::new();
    while header.len() < 4 {
        header.push(next_token(&mut r)?);
    }
    let fmt = match header[0].as_str() {
        "P2" => PgmFormat::Plain,
        "P5" => PgmFormat::Binary,
        m => return Err(Error::Format(format!("unsupported PGM magic {m:?}"))),
    };
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM header field {s:?}")));
    let (width, height, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    let n = width * height;
    let mut pixels = Vec::with_capacity(n);
    match fmt {
        PgmFormat::Plain => {
            for _ in 0..n {
                let v = num(&next_token(&mut r)?)?;
                if v > maxval {
                    return Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")));
                }
                pixels.push(v as f64);
            }
        }
        PgmFormat::Binary => {
            let width_bytes = if maxval < 256 { 1 } else { 2 };
            let mut buf = vec![0u8; n * width_bytes];
            r.read_exact(&mut buf).map_err(|_| Error::Format("truncated PGM raster".into()))?;
            if width_bytes == 1 {
                pixels.extend(buf.iter().map(|&b| b as f64));
            } else {
                pixels.extend(buf.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64));
            }
        }
    }
    Image::new(height, width, pixels, maxval as f64)
}

/// Next whitespace-separated header token, skipping `#` comments. For `P5`
/// the single whitespace byte after maxval is consumed here.
fn next_token(r: &mut impl BufRead) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            if tok.is_empty() {
                return Err(Error::Format("unexpected end of PGM data".into()));
            }
            return Ok(tok);
        }
        let c = byte[0];
        if c == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
        } else if c.is_ascii_whitespace() {
            if !tok.is_empty() {
                return Ok(tok);
            }
        } else {
            tok.push(c as char);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(h: usize, w: usize, v: &[f64]) -> Image {
        Image::new(h, w, v.to_vec(), 255.0).unwrap()
    }

    #[test]
    fn symmetric_padding_repeats_edges() {
        let row = img(1, 3, &[1.0, 2.0, 3.0]);
        // Pad only horizontally by building a 3-row image and reading its middle row.
        let tall = Image::from_fn(3, 3, 255.0, |_, c| row.get(0, c)).unwrap();
        let p = pad_symmetric(&tall, 2).unwrap();
        let mid: Vec<f64> = (0..7).map(|c| p.get(3, c)).collect();
        assert_eq!(mid, vec![2.0, 1.0, 1.0, 2.0, 3.0, 3.0, 2.0]);
        assert_eq!(crop(&p, 2).unwrap(), tall);
        assert_eq!(pad_symmetric(&tall, 0).unwrap(), tall);
        assert!(pad_symmetric(&tall, 3).is_err());
    }

    #[test]
    fn metrics_on_constant_offset() {
        let r = Image::from_fn(4, 5, 255.0, |i, j| (i * 5 + j) as f64 + 1.0).unwrap();
        assert_eq!(psnr(&r, &r).unwrap(), PSNR_CAP);
        assert_eq!(relerr(&r, &r).unwrap(), 0.0);
        assert!((ssim_global(&r, &r).unwrap() - 1.0).abs() < 1e-15);
        let c = 2.5;
        let x = Image::from_fn(4, 5, 255.0, |i, j| r.get(i, j) + c).unwrap();
        let norm = r.pixels().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((relerr(&x, &r).unwrap() - c * 20f64.sqrt() / norm).abs() < 1e-14);
        let expected = 20.0 * (255.0 / (c * 20f64.sqrt())).log10();
        assert!((psnr(&x, &r).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn pgm_round_trips() {
        for (maxval, fmt) in [
            (255u16, PgmFormat::Plain),
            (255, PgmFormat::Binary),
            (65535, PgmFormat::Binary),
            (65535, PgmFormat::Plain),
        ] {
            let im = Image::from_fn(3, 4, maxval as f64, |r, c| ((r * 4 + c) * 4099 % (maxval as usize + 1)) as f64)
                .unwrap();
            let mut buf = Vec::new();
            write_pgm(&im, maxval, fmt, &mut buf).unwrap();
            assert_eq!(read_pgm(&buf[..]).unwrap(), im);
        }
    }

    #[test]
    fn pgm_header_comments_and_errors() {
        let text = b"P2\n# comment\n2 1\n# another\n10\n3 10\n";
        let im = read_pgm(&text[..]).unwrap();
        assert_eq!(im.pixels(), &[3.0, 10.0]);
        assert!(read_pgm(&b"P2\n2 1\n10\n3 11\n"[..]).is_err());
        assert!(read_pgm(&b"P6\n1 1\n255\n"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 2\n255\n\x01"[..]).is_err());
    }
}
