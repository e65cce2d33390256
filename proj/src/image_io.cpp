#include "evsplat/image_io.hpp"

#include "text_util.hpp"

#include <png.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace evsplat {

namespace {

constexpr std::array<char, 4> kFloatMagic = {'E', 'V', 'S', 'F'};
constexpr std::uint32_t kFloatVersion = 1;

static_assert(std::endian::native == std::endian::little, "float dumps assume a little-endian host");

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

} // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.channels() != 1 && image.channels() != 3) {
        fail(ErrorCode::kInvalidArgument, "PNG output supports 1 or 3 channels");
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "wb"));
    if (!file) fail(ErrorCode::kInvalidArgument, "cannot write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::kInvalidArgument, "libpng initialisation failed");
    }
    const int w = image.width(), h = image.height(), c = image.channels();
    std::vector<png_byte> row(static_cast<std::size_t>(w) * c);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::kInvalidArgument, "libpng failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, w, h, 8, c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                row[static_cast<std::size_t>(x) * c + ch] =
                    static_cast<png_byte>(std::lround(std::clamp(image.at(x, y, ch), 0.0, 1.0) * 255.0));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_float_image(const std::filesystem::path& path, const Image& image) {
    auto out = detail::open_for_writing(path);
    const std::uint32_t header[4] = {kFloatVersion, static_cast<std::uint32_t>(image.width()),
                                     static_cast<std::uint32_t>(image.height()),
                                     static_cast<std::uint32_t>(image.channels())};
    out.write(kFloatMagic.data(), kFloatMagic.size());
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    std::vector<float> values(image.size());
    const auto src = image.data();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(src[i]);
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!out) fail(ErrorCode::kInvalidArgument, "failed writing " + path.string());
}

Image read_float_image(const std::filesystem::path& path) {
    auto in = detail::open_for_reading(path);
    std::array<char, 4> magic{};
    std::uint32_t header[4] = {};
    in.read(magic.data(), magic.size());
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || magic != kFloatMagic) fail(ErrorCode::kParseError, path.string() + ": not a float image dump");
    if (header[0] != kFloatVersion) fail(ErrorCode::kParseError, path.string() + ": unsupported float dump version");
    if (header[3] < 1 || header[1] > 1u << 16 || header[2] > 1u << 16 || header[3] > 4) {
        fail(ErrorCode::kParseError, path.string() + ": implausible float dump dimensions");
    }
    Image image(static_cast<int>(header[1]), static_cast<int>(header[2]), static_cast<int>(header[3]));
    std::vector<float> values(image.size());
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!in) fail(ErrorCode::kParseError, path.string() + ": truncated float dump");
    auto dst = image.data();
    for (std::size_t i = 0; i < values.size(); ++i) dst[i] = values[i];
    return image;
}

} // namespace evsplat
