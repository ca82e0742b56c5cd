#include "ctforge/dicom.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>

#include "ctforge/error.hpp"
#include "ctforge/raw_io.hpp"

namespace ctforge {

MissingTag::MissingTag(unsigned group, unsigned element)
    : Error("missing required tag " + DicomTag{static_cast<std::uint16_t>(group),
                                               static_cast<std::uint16_t>(element)}
                                          .to_string()),
      group_(group), element_(element) {}

std::string DicomTag::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "(%04X,%04X)", group, element);
    return buf;
}

namespace {

constexpr std::size_t kPreambleSize = 128;

// VRs that use the 4-byte length form with two reserved bytes.
bool is_long_vr(const std::string& vr) {
    return vr == "OB" || vr == "OW" || vr == "OF" || vr == "OD" || vr == "SQ" ||
           vr == "UT" || vr == "UN";
}

bool is_known_vr(const std::string& vr) {
    static const std::array<const char*, 27> known = {
        "AE", "AS", "AT", "CS", "DA", "DS", "DT", "FL", "FD",
        "IS", "LO", "LT", "OB", "OD", "OF", "OW", "PN", "SH",
        "SL", "SQ", "SS", "ST", "TM", "UI", "UL", "UN", "US"};
    return std::any_of(known.begin(), known.end(),
                       [&](const char* k) { return vr == k; });
}

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    bool done() const noexcept { return pos_ >= bytes_.size(); }

    std::uint16_t u16() {
        need(2);
        const std::uint16_t v = static_cast<std::uint16_t>(
            bytes_[pos_] | (static_cast<std::uint16_t>(bytes_[pos_ + 1]) << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
        pos_ += 4;
        return v;
    }
    std::vector<std::uint8_t> take(std::size_t n) {
        need(n);
        std::vector<std::uint8_t> out(bytes_.begin() + static_cast<long>(pos_),
                                      bytes_.begin() + static_cast<long>(pos_ + n));
        pos_ += n;
        return out;
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw MalformedFile("dicom: truncated input");
    }
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

std::string trimmed_string(const std::vector<std::uint8_t>& value) {
    std::string s(value.begin(), value.end());
    while (!s.empty() && (s.back() == '\0' || s.back() == ' ')) s.pop_back();
    std::size_t start = 0;
    while (start < s.size() && s[start] == ' ') ++start;
    return s.substr(start);
}

std::uint16_t decode_us(const DicomElement& e) {
    if (e.value.size() < 2) {
        throw MalformedFile("dicom: US element " + e.tag.to_string() + " too short");
    }
    return static_cast<std::uint16_t>(e.value[0] |
                                      (static_cast<std::uint16_t>(e.value[1]) << 8));
}

long decode_is(const DicomElement& e) {
    const std::string s = trimmed_string(e.value);
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw MalformedFile("dicom: bad IS value in " + e.tag.to_string());
    }
    return v;
}

std::vector<std::uint8_t> pad_even(std::string s, char pad) {
    if (s.size() % 2 != 0) s.push_back(pad);
    return std::vector<std::uint8_t>(s.begin(), s.end());
}

}  // namespace

std::vector<double> parse_ds(const std::vector<std::uint8_t>& value, DicomTag tag) {
    const std::string s(value.begin(), value.end());
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t end = s.find('\\', start);
        if (end == std::string::npos) end = s.size();
        std::string item = s.substr(start, end - start);
        while (!item.empty() && (item.back() == ' ' || item.back() == '\0')) {
            item.pop_back();
        }
        std::size_t lead = 0;
        while (lead < item.size() && item[lead] == ' ') ++lead;
        item = item.substr(lead);
        if (item.empty()) {
            throw MalformedFile("dicom: empty DS component in " + tag.to_string());
        }
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw MalformedFile("dicom: bad DS value '" + item + "' in " +
                                tag.to_string());
        }
        if (end == s.size()) break;
        start = end + 1;
    }
    return out;
}

std::string encode_ds(double v) {
    std::string s = format_double(v);
    if (s.size() > 16) {
        throw Error("dicom: value " + s + " does not fit the 16-char DS limit");
    }
    return s;
}

void DicomSlice::decode_cache() {
    const auto* ts = find(tags::kTransferSyntax);
    if (ts != nullptr && trimmed_string(ts->value) != kTransferSyntaxEvrLe) {
        throw UnsupportedTransferSyntax("dicom: transfer syntax '" +
                                        trimmed_string(ts->value) +
                                        "' not supported");
    }
    const auto require = [&](DicomTag tag) -> const DicomElement& {
        const auto* e = find(tag);
        if (e == nullptr) throw MissingTag(tag.group, tag.element);
        return *e;
    };

    pixel_rows_ = decode_us(require(tags::kRows));
    pixel_cols_ = decode_us(require(tags::kColumns));
    if (pixel_rows_ <= 0 || pixel_cols_ <= 0) {
        throw MalformedFile("dicom: non-positive rows/cols");
    }

    const auto spacing = parse_ds(require(tags::kPixelSpacing).value,
                                  tags::kPixelSpacing);
    if (spacing.size() != 2) {
        throw MalformedFile("dicom: PixelSpacing must have two components");
    }
    pixel_spacing_row_ = spacing[0];
    pixel_spacing_col_ = spacing[1];

    const auto thickness = parse_ds(require(tags::kSliceThickness).value,
                                    tags::kSliceThickness);
    if (thickness.size() != 1) {
        throw MalformedFile("dicom: SliceThickness must have one component");
    }
    slice_thickness_ = thickness[0];
    if (pixel_spacing_row_ <= 0 || pixel_spacing_col_ <= 0 ||
        slice_thickness_ <= 0) {
        throw MalformedFile("dicom: spacing values must be positive");
    }

    instance_number_ =
        static_cast<int>(decode_is(require(tags::kInstanceNumber)));

    rescale_slope_ = 1.0;
    rescale_intercept_ = 0.0;
    if (const auto* e = find(tags::kRescaleSlope)) {
        const auto v = parse_ds(e->value, tags::kRescaleSlope);
        if (v.size() != 1 || v[0] == 0.0) {
            throw MalformedFile("dicom: bad RescaleSlope");
        }
        rescale_slope_ = v[0];
    }
    if (const auto* e = find(tags::kRescaleIntercept)) {
        const auto v = parse_ds(e->value, tags::kRescaleIntercept);
        if (v.size() != 1) throw MalformedFile("dicom: bad RescaleIntercept");
        rescale_intercept_ = v[0];
    }

    bool pixels_signed = true;
    if (const auto* e = find(tags::kPixelRepresentation)) {
        pixels_signed = decode_us(*e) != 0;
    }

    const auto& px = require(tags::kPixelData);
    const std::size_t expected =
        static_cast<std::size_t>(pixel_rows_) * pixel_cols_ * 2;
    if (px.vr != "OW" && px.vr != "OB") {
        throw MalformedFile("dicom: PixelData VR must be OW or OB");
    }
    if (px.value.size() != expected) {
        throw MalformedFile("dicom: PixelData length " +
                            std::to_string(px.value.size()) + " != rows*cols*2");
    }
    pixels_hu_.resize(static_cast<std::size_t>(pixel_rows_) * pixel_cols_);
    for (std::size_t i = 0; i < pixels_hu_.size(); ++i) {
        const std::uint16_t raw = static_cast<std::uint16_t>(
            px.value[2 * i] | (static_cast<std::uint16_t>(px.value[2 * i + 1]) << 8));
        const double stored = pixels_signed
                                  ? static_cast<double>(static_cast<std::int16_t>(raw))
                                  : static_cast<double>(raw);
        pixels_hu_[i] = clamp_hu(stored * rescale_slope_ + rescale_intercept_);
    }

    if (const auto* e = find(tags::kSeriesInstanceUid)) {
        series_uid_ = trimmed_string(e->value);
    } else {
        series_uid_.clear();
    }
}

const DicomElement* DicomSlice::find(DicomTag tag) const {
    const auto it = std::lower_bound(
        elements_.begin(), elements_.end(), tag,
        [](const DicomElement& e, DicomTag t) { return e.tag < t; });
    if (it != elements_.end() && it->tag == tag) return &*it;
    return nullptr;
}

void DicomSlice::set_element(DicomTag tag, std::string vr,
                             std::vector<std::uint8_t> value) {
    if (value.size() % 2 != 0) {
        throw Error("dicom: element values must have even length");
    }
    const auto it = std::lower_bound(
        elements_.begin(), elements_.end(), tag,
        [](const DicomElement& e, DicomTag t) { return e.tag < t; });
    if (it != elements_.end() && it->tag == tag) {
        it->vr = std::move(vr);
        it->value = std::move(value);
    } else {
        elements_.insert(it, DicomElement{tag, std::move(vr), std::move(value)});
    }
}

bool DicomSlice::remove_element(DicomTag tag) {
    const auto it = std::lower_bound(
        elements_.begin(), elements_.end(), tag,
        [](const DicomElement& e, DicomTag t) { return e.tag < t; });
    if (it != elements_.end() && it->tag == tag) {
        elements_.erase(it);
        return true;
    }
    return false;
}

void DicomSlice::set_pixel_data(const std::vector<std::int16_t>& hu) {
    const std::size_t n = static_cast<std::size_t>(pixel_rows_) * pixel_cols_;
    if (hu.size() != n) {
        throw ShapeMismatch("dicom: pixel grid size mismatch");
    }
    bool pixels_signed = true;
    if (const auto* e = find(tags::kPixelRepresentation)) {
        pixels_signed = decode_us(*e) != 0;
    }
    std::vector<std::uint8_t> payload(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double stored_d =
            (static_cast<double>(hu[i]) - rescale_intercept_) / rescale_slope_;
        const long stored = std::lround(stored_d);
        std::uint16_t raw;
        if (pixels_signed) {
            const long c = std::clamp(stored, -32768L, 32767L);
            raw = static_cast<std::uint16_t>(static_cast<std::int16_t>(c));
        } else {
            raw = static_cast<std::uint16_t>(std::clamp(stored, 0L, 65535L));
        }
        payload[2 * i] = static_cast<std::uint8_t>(raw & 0xff);
        payload[2 * i + 1] = static_cast<std::uint8_t>(raw >> 8);
    }
    const auto* px = find(tags::kPixelData);
    set_element(tags::kPixelData, px != nullptr ? px->vr : "OW", std::move(payload));
    pixels_hu_ = hu;
}

DicomSlice parse_dicom(const std::vector<std::uint8_t>& bytes) {
    ByteReader reader(bytes);
    if (bytes.size() < kPreambleSize + 4) {
        throw MalformedFile("dicom: file shorter than preamble + magic");
    }
    reader.skip(kPreambleSize);
    const auto magic = reader.take(4);
    if (std::memcmp(magic.data(), "DICM", 4) != 0) {
        throw MalformedFile("dicom: missing DICM magic");
    }

    DicomSlice slice;
    DicomTag prev{0, 0};
    bool first = true;
    while (!reader.done()) {
        DicomElement e;
        e.tag.group = reader.u16();
        e.tag.element = reader.u16();
        const auto vr_bytes = reader.take(2);
        e.vr.assign(vr_bytes.begin(), vr_bytes.end());
        if (!is_known_vr(e.vr)) {
            throw MalformedFile("dicom: unknown VR at tag " + e.tag.to_string());
        }
        std::size_t length;
        if (is_long_vr(e.vr)) {
            const std::uint16_t reserved = reader.u16();
            if (reserved != 0) {
                throw MalformedFile("dicom: nonzero reserved bytes at " +
                                    e.tag.to_string());
            }
            const std::uint32_t len = reader.u32();
            if (len == 0xFFFFFFFFu) {
                throw MalformedFile("dicom: undefined lengths are not supported");
            }
            length = len;
        } else {
            length = reader.u16();
        }
        if (length % 2 != 0) {
            throw MalformedFile("dicom: odd element length at " + e.tag.to_string());
        }
        if (length > reader.remaining()) {
            throw MalformedFile("dicom: declared length exceeds file at " +
                                e.tag.to_string());
        }
        e.value = reader.take(length);

        if (!first && !(prev < e.tag)) {
            throw MalformedFile("dicom: elements not in ascending tag order at " +
                                e.tag.to_string());
        }
        prev = e.tag;
        first = false;
        slice.elements_.push_back(std::move(e));
    }

    slice.decode_cache();
    return slice;
}

std::vector<std::uint8_t> write_dicom(const DicomSlice& slice) {
    if (slice.pixel_rows() <= 0 || slice.pixel_cols() <= 0) {
        throw Error("dicom: slice has non-positive pixel dimensions");
    }
    std::vector<std::uint8_t> out(kPreambleSize, 0);
    out.insert(out.end(), {'D', 'I', 'C', 'M'});
    const auto put16 = [&](std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v & 0xff));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    };
    const auto put32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            out.push_back(static_cast<std::uint8_t>(v & 0xff));
            v >>= 8;
        }
    };
    for (const auto& e : slice.elements()) {
        put16(e.tag.group);
        put16(e.tag.element);
        out.push_back(static_cast<std::uint8_t>(e.vr[0]));
        out.push_back(static_cast<std::uint8_t>(e.vr[1]));
        if (is_long_vr(e.vr)) {
            put16(0);
            put32(static_cast<std::uint32_t>(e.value.size()));
        } else {
            if (e.value.size() > 0xFFFF) {
                throw Error("dicom: value too long for short form at " +
                            e.tag.to_string());
            }
            put16(static_cast<std::uint16_t>(e.value.size()));
        }
        out.insert(out.end(), e.value.begin(), e.value.end());
    }
    return out;
}

DicomSlice make_slice(int rows, int cols, double spacing_row, double spacing_col,
                      double thickness, int instance_number,
                      const std::string& series_uid,
                      const std::vector<std::int16_t>& hu) {
    if (rows <= 0 || cols <= 0) {
        throw Error("make_slice: rows/cols must be positive");
    }
    if (spacing_row <= 0 || spacing_col <= 0 || thickness <= 0) {
        throw Error("make_slice: spacing values must be positive");
    }
    if (hu.size() != static_cast<std::size_t>(rows) * cols) {
        throw ShapeMismatch("make_slice: pixel grid size mismatch");
    }

    DicomSlice slice;
    const auto us = [](std::uint16_t v) {
        return std::vector<std::uint8_t>{static_cast<std::uint8_t>(v & 0xff),
                                         static_cast<std::uint8_t>(v >> 8)};
    };
    slice.set_element(tags::kTransferSyntax, "UI",
                      pad_even(kTransferSyntaxEvrLe, '\0'));
    slice.set_element(tags::kSliceThickness, "DS",
                      pad_even(encode_ds(thickness), ' '));
    if (!series_uid.empty()) {
        slice.set_element(tags::kSeriesInstanceUid, "UI", pad_even(series_uid, '\0'));
    }
    slice.set_element(tags::kInstanceNumber, "IS",
                      pad_even(std::to_string(instance_number), ' '));
    slice.set_element(tags::kRows, "US", us(static_cast<std::uint16_t>(rows)));
    slice.set_element(tags::kColumns, "US", us(static_cast<std::uint16_t>(cols)));
    slice.set_element(tags::kPixelSpacing, "DS",
                      pad_even(encode_ds(spacing_row) + "\\" + encode_ds(spacing_col),
                               ' '));
    slice.set_element(tags::kBitsAllocated, "US", us(16));
    slice.set_element(tags::kBitsStored, "US", us(16));
    slice.set_element(tags::kHighBit, "US", us(15));
    slice.set_element(tags::kPixelRepresentation, "US", us(1));

    std::vector<std::uint8_t> payload(hu.size() * 2);
    for (std::size_t i = 0; i < hu.size(); ++i) {
        const std::uint16_t raw = static_cast<std::uint16_t>(hu[i]);
        payload[2 * i] = static_cast<std::uint8_t>(raw & 0xff);
        payload[2 * i + 1] = static_cast<std::uint8_t>(raw >> 8);
    }
    slice.set_element(tags::kPixelData, "OW", std::move(payload));
    slice.decode_cache();
    return slice;
}

Volume assemble_volume(std::vector<DicomSlice> slices) {
    if (slices.empty()) throw InconsistentSeries("assemble: no slices given");
    const auto& ref = slices.front();
    for (const auto& s : slices) {
        if (s.pixel_rows() != ref.pixel_rows() ||
            s.pixel_cols() != ref.pixel_cols()) {
            throw InconsistentSeries("assemble: differing pixel dimensions");
        }
        if (s.pixel_spacing_row() != ref.pixel_spacing_row() ||
            s.pixel_spacing_col() != ref.pixel_spacing_col() ||
            s.slice_thickness() != ref.slice_thickness()) {
            throw InconsistentSeries("assemble: differing spacing");
        }
        if (s.series_uid() != ref.series_uid()) {
            throw InconsistentSeries("assemble: differing series UID");
        }
    }
    std::sort(slices.begin(), slices.end(),
              [](const DicomSlice& a, const DicomSlice& b) {
                  return a.instance_number() < b.instance_number();
              });
    for (std::size_t i = 1; i < slices.size(); ++i) {
        const int prev = slices[i - 1].instance_number();
        const int cur = slices[i].instance_number();
        if (cur == prev) {
            throw InconsistentSeries("assemble: duplicate instance number " +
                                     std::to_string(cur));
        }
        if (cur != prev + 1) {
            throw GapInSeries("assemble: instance numbers skip from " +
                              std::to_string(prev) + " to " + std::to_string(cur));
        }
    }

    const int nx = ref.pixel_cols();
    const int ny = ref.pixel_rows();
    const int nz = static_cast<int>(slices.size());
    std::vector<std::int16_t> voxels(static_cast<std::size_t>(nx) * ny * nz);
    for (int z = 0; z < nz; ++z) {
        const auto& px = slices[static_cast<std::size_t>(z)].pixel_data();
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                voxels[static_cast<std::size_t>(x) +
                       static_cast<std::size_t>(nx) *
                           (static_cast<std::size_t>(y) +
                            static_cast<std::size_t>(ny) * z)] =
                    px[static_cast<std::size_t>(y) * nx + x];
            }
        }
    }
    return Volume({nx, ny, nz},
                  {ref.pixel_spacing_col(), ref.pixel_spacing_row(),
                   ref.slice_thickness()},
                  std::move(voxels), ref.series_uid());
}

std::vector<DicomSlice> split_volume(const Volume& volume) {
    const int nx = volume.dims().x;
    const int ny = volume.dims().y;
    const int nz = volume.dims().z;
    std::vector<DicomSlice> slices;
    slices.reserve(static_cast<std::size_t>(nz));
    for (int z = 0; z < nz; ++z) {
        std::vector<std::int16_t> hu(static_cast<std::size_t>(nx) * ny);
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                hu[static_cast<std::size_t>(y) * nx + x] = volume.at(x, y, z);
            }
        }
        slices.push_back(make_slice(ny, nx, volume.spacing().y, volume.spacing().x,
                                    volume.spacing().z, z + 1, volume.series_id(),
                                    hu));
    }
    return slices;
}

}  // namespace ctforge
