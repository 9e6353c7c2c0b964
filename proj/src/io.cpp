// SPDX-License-Identifier: Apache-2.0
#include "flowsteer/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "flowsteer/errors.hpp"

namespace flowsteer {

namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'S', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
    return v;
}

void require_bytes(std::span<const std::uint8_t> bytes, std::size_t offset, std::size_t n, const char* what) {
    if (offset + n > bytes.size()) throw FormatError(std::string("truncated FST record: ") + what, offset);
}

}  // namespace

void append_fst(std::vector<std::uint8_t>& out, const Tensor& t) {
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(kFstVersion);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

Tensor decode_fst(std::span<const std::uint8_t> bytes, std::size_t& offset) {
    require_bytes(bytes, offset, 4, "magic");
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin() + static_cast<std::ptrdiff_t>(offset))) {
        throw FormatError("bad FST magic", offset);
    }
    offset += 4;
    require_bytes(bytes, offset, 1, "version");
    if (bytes[offset] != kFstVersion) {
        throw FormatError("unsupported FST version " + std::to_string(bytes[offset]), offset);
    }
    offset += 1;
    require_bytes(bytes, offset, 4, "ndim");
    const std::uint32_t ndim = get_u32(bytes, offset);
    if (ndim == 0) throw FormatError("FST record has zero dimensions", offset);
    offset += 4;
    require_bytes(bytes, offset, 4 * static_cast<std::size_t>(ndim), "extents");
    Dims dims(ndim);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        dims[i] = get_u32(bytes, offset);
        if (dims[i] == 0) throw FormatError("FST extent is zero", offset);
        count *= dims[i];
        offset += 4;
    }
    require_bytes(bytes, offset, 4 * count, "payload");
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, offset)));
        offset += 4;
    }
    return Tensor(std::move(dims), std::move(data));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_fst(const std::filesystem::path& path, const Tensor& t) { write_fst_records(path, {t}); }

Tensor read_fst(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    std::size_t offset = 0;
    Tensor t = decode_fst(bytes, offset);
    if (offset != bytes.size()) throw FormatError("trailing bytes after FST record", offset);
    return t;
}

void write_fst_records(const std::filesystem::path& path, const std::vector<Tensor>& tensors) {
    std::vector<std::uint8_t> bytes;
    for (const auto& t : tensors) append_fst(bytes, t);
    write_bytes(path, bytes);
}

std::vector<Tensor> read_fst_records(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    std::vector<Tensor> out;
    std::size_t offset = 0;
    while (offset < bytes.size()) out.push_back(decode_fst(bytes, offset));
    return out;
}

std::uint8_t to_byte(double v) noexcept {
    const double c = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::round(c * 255.0));
}

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
    if (!image.is_image()) throw ShapeError("PPM export needs a 1- or 3-channel image, got " + dims_to_string(image.dims()));
    const std::size_t c = image.channels();
    const std::size_t h = image.height();
    const std::size_t w = image.width();
    const std::string header = std::string(c == 3 ? "P6" : "P5") + "\n" + std::to_string(w) + " " +
                               std::to_string(h) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + c * h * w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch) out.push_back(to_byte(image.at(ch, y, x)));
    return out;
}

Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&](const char* what) {
        skip_space();
        const std::size_t start = pos;
        std::size_t v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            ++pos;
            if (v > (1u << 24)) throw FormatError(std::string("PPM ") + what + " too large", start);
        }
        if (pos == start) throw FormatError(std::string("PPM header: expected ") + what, start);
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
        throw FormatError("PPM header: expected P6 or P5 magic", 0);
    }
    const std::size_t channels = bytes[1] == '6' ? 3 : 1;
    pos = 2;
    const std::size_t w = read_int("width");
    const std::size_t h = read_int("height");
    const std::size_t maxval_at = pos;
    const std::size_t maxval = read_int("maxval");
    if (maxval != 255) throw FormatError("PPM maxval must be 255", maxval_at);
    if (w == 0 || h == 0) throw FormatError("PPM has zero extent", maxval_at);
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("PPM header: missing separator", pos);
    ++pos;
    const std::size_t need = channels * w * h;
    if (bytes.size() - pos < need) throw FormatError("PPM payload truncated", pos);
    Tensor img = Tensor::image(channels, h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < channels; ++ch) img.at(ch, y, x) = bytes[pos++] / 255.0;
    return img;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) { write_bytes(path, encode_ppm(image)); }

Tensor read_ppm(const std::filesystem::path& path) { return decode_ppm(read_bytes(path)); }

}  // namespace flowsteer
