#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctforge/volume.hpp"

namespace ctforge {

struct DicomTag {
    std::uint16_t group = 0;
    std::uint16_t element = 0;

    friend bool operator==(const DicomTag&, const DicomTag&) = default;
    friend auto operator<=>(const DicomTag& a, const DicomTag& b) {
        if (auto c = a.group <=> b.group; c != 0) return c;
        return a.element <=> b.element;
    }
    std::string to_string() const;
};

// Well-known tags used by the toolkit.
namespace tags {
inline constexpr DicomTag kTransferSyntax{0x0002, 0x0010};
inline constexpr DicomTag kSliceThickness{0x0018, 0x0050};
inline constexpr DicomTag kSeriesInstanceUid{0x0020, 0x000E};
inline constexpr DicomTag kInstanceNumber{0x0020, 0x0013};
inline constexpr DicomTag kRows{0x0028, 0x0010};
inline constexpr DicomTag kColumns{0x0028, 0x0011};
inline constexpr DicomTag kPixelSpacing{0x0028, 0x0030};
inline constexpr DicomTag kBitsAllocated{0x0028, 0x0100};
inline constexpr DicomTag kBitsStored{0x0028, 0x0101};
inline constexpr DicomTag kHighBit{0x0028, 0x0102};
inline constexpr DicomTag kPixelRepresentation{0x0028, 0x0103};
inline constexpr DicomTag kRescaleIntercept{0x0028, 0x1052};
inline constexpr DicomTag kRescaleSlope{0x0028, 0x1053};
inline constexpr DicomTag kSignaturePrivate{0x7777, 0x0010};
inline constexpr DicomTag kPixelData{0x7FE0, 0x0010};
}  // namespace tags

inline constexpr char kTransferSyntaxEvrLe[] = "1.2.840.10008.1.2.1";

struct DicomElement {
    DicomTag tag;
    std::string vr;                   // two-character value representation
    std::vector<std::uint8_t> value;  // raw bytes, even length
};

// One CT slice: the ordered element list is the source of truth; decoded
// fields are a cache kept consistent by the accessors below.
class DicomSlice {
public:
    const std::vector<DicomElement>& elements() const noexcept { return elements_; }

    int pixel_rows() const noexcept { return pixel_rows_; }
    int pixel_cols() const noexcept { return pixel_cols_; }
    int instance_number() const noexcept { return instance_number_; }
    double pixel_spacing_row() const noexcept { return pixel_spacing_row_; }
    double pixel_spacing_col() const noexcept { return pixel_spacing_col_; }
    double slice_thickness() const noexcept { return slice_thickness_; }
    double rescale_slope() const noexcept { return rescale_slope_; }
    double rescale_intercept() const noexcept { return rescale_intercept_; }
    const std::string& series_uid() const noexcept { return series_uid_; }

    // Hounsfield values, row-major (row = y, column = x).
    const std::vector<std::int16_t>& pixel_data() const noexcept { return pixels_hu_; }
    std::int16_t pixel(int row, int col) const {
        return pixels_hu_[static_cast<std::size_t>(row) * pixel_cols_ + col];
    }
    // Replaces the pixel grid (same dimensions) and re-encodes the pixel
    // data element so a subsequent write reflects the change.
    void set_pixel_data(const std::vector<std::int16_t>& hu);

    const DicomElement* find(DicomTag tag) const;
    // Inserts or replaces an element keeping the ascending-tag invariant.
    void set_element(DicomTag tag, std::string vr, std::vector<std::uint8_t> value);
    bool remove_element(DicomTag tag);

    friend DicomSlice parse_dicom(const std::vector<std::uint8_t>& bytes);
    friend DicomSlice make_slice(int rows, int cols, double spacing_row,
                                 double spacing_col, double thickness,
                                 int instance_number, const std::string& series_uid,
                                 const std::vector<std::int16_t>& hu);

private:
    void decode_cache();

    std::vector<DicomElement> elements_;
    std::vector<std::int16_t> pixels_hu_;
    int pixel_rows_ = 0;
    int pixel_cols_ = 0;
    int instance_number_ = 0;
    double pixel_spacing_row_ = 0.0;
    double pixel_spacing_col_ = 0.0;
    double slice_thickness_ = 0.0;
    double rescale_slope_ = 1.0;
    double rescale_intercept_ = 0.0;
    std::string series_uid_;
};

// Parses an Explicit-VR Little-Endian file (128-byte preamble + "DICM").
// Throws MalformedFile, MissingTag, or UnsupportedTransferSyntax. Never reads
// past declared lengths or the end of the buffer.
DicomSlice parse_dicom(const std::vector<std::uint8_t>& bytes);

// Serializes a slice. For a slice parsed from a conforming file and not
// modified since, the output is byte-identical to the input file.
std::vector<std::uint8_t> write_dicom(const DicomSlice& slice);

// Builds a canonical slice from scratch (used by split_volume and fixtures).
DicomSlice make_slice(int rows, int cols, double spacing_row, double spacing_col,
                      double thickness, int instance_number,
                      const std::string& series_uid,
                      const std::vector<std::int16_t>& hu);

// Stacks slices in instance-number order. Requires consistent geometry and a
// contiguous instance-number range. Resulting spacing is
// (pixel_spacing.col, pixel_spacing.row, slice_thickness).
Volume assemble_volume(std::vector<DicomSlice> slices);

// Inverse of assemble_volume; instance numbers start at 1.
std::vector<DicomSlice> split_volume(const Volume& volume);

// DS (decimal string) helpers shared with tests.
std::vector<double> parse_ds(const std::vector<std::uint8_t>& value, DicomTag tag);
std::string encode_ds(double v);

}  // namespace ctforge
