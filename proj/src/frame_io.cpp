#include "dctstab/frame_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "dctstab/error.hpp"

namespace fs = std::filesystem;

namespace dctstab {

namespace {

using FilePtr = std::unique_ptr<FILE, int (*)(FILE*)>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FILE* f = std::fopen(path.string().c_str(), mode);
  if (!f) throw InputError("cannot open " + path.string());
  return {f, &std::fclose};
}

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return e;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

Frame read_png(const fs::path& path, FrameEncoding* encoding) {
  FilePtr file = open_file(path, "rb");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw InputError("cannot initialise PNG reader for " + path.string());
  }
  // Everything that must outlive a longjmp lives outside this frame.
  Frame frame;
  int depth = 8;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("unreadable PNG " + path.string() + ": " + err);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth < 8) depth = 8;
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  frame = Frame(static_cast<int>(h), static_cast<int>(w), channels, 0.0f);
  frame.valid = Mask(static_cast<int>(h), static_cast<int>(w), 1);
  const double maxval = depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        const size_t i = static_cast<size_t>(x) * channels + c;
        const unsigned v = depth == 16 ? (rows[y][2 * i] << 8) | rows[y][2 * i + 1] : rows[y][i];
        frame.channels[c](y, x) = static_cast<float>(v / maxval);
      }
  if (encoding) *encoding = {FrameFormat::Png, depth};
  return frame;
}

struct PngLayout {
  int width;
  int height;
  int depth;
  int color_type;
};

void encode_png(FILE* file, const fs::path& path, const PngLayout& layout, png_bytepp rows) {
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ProcessingError("cannot initialise PNG writer for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ProcessingError("cannot write " + path.string() + ": " + err);
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, layout.width, layout.height, layout.depth, layout.color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png(const fs::path& path, const Frame& frame, int depth) {
  const int h = frame.height();
  const int w = frame.width();
  const int channels = frame.channel_count();
  const int bytes = depth == 16 ? 2 : 1;
  const double maxval = depth == 16 ? 65535.0 : 255.0;
  std::vector<unsigned char> buffer(static_cast<size_t>(h) * w * channels * bytes);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        const double v = frame.valid(y, x) ? frame.channels[c](y, x) : 0.0;
        const unsigned q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
        const size_t i = ((static_cast<size_t>(y) * w + x) * channels + c) * bytes;
        if (depth == 16) {
          buffer[i] = static_cast<unsigned char>(q >> 8);
          buffer[i + 1] = static_cast<unsigned char>(q & 0xff);
        } else {
          buffer[i] = static_cast<unsigned char>(q);
        }
      }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buffer.data() + static_cast<size_t>(y) * w * channels * bytes;
  const PngLayout layout{w, h, depth, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB};
  FilePtr file = open_file(path, "wb");
  encode_png(file.get(), path, layout, rows.data());
}

/// Next whitespace-separated header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

Frame read_pnm(const fs::path& path, FrameEncoding* encoding) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string magic = pnm_token(in);
  if (magic != "P5" && magic != "P6") throw InputError("unsupported PNM type in " + path.string());
  const int channels = magic == "P5" ? 1 : 3;
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pnm_token(in));
    h = std::stoi(pnm_token(in));
    maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw InputError("malformed PNM header in " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw InputError("malformed PNM header in " + path.string());
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> data(static_cast<size_t>(w) * h * channels * bytes);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size()))
    throw InputError("truncated PNM data in " + path.string());

  Frame frame(h, w, channels, 0.0f);
  frame.valid = Mask(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        const size_t i = (static_cast<size_t>(y) * w + x) * channels + c;
        const unsigned v = bytes == 2 ? (data[2 * i] << 8) | data[2 * i + 1] : data[i];
        frame.channels[c](y, x) = static_cast<float>(static_cast<double>(v) / maxval);
      }
  if (encoding) *encoding = {FrameFormat::Pnm, bytes == 2 ? 16 : 8};
  return frame;
}

void write_pnm(const fs::path& path, const Frame& frame, int depth) {
  const int channels = frame.channel_count();
  const int maxval = depth == 16 ? 65535 : 255;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ProcessingError("cannot write " + path.string());
  out << (channels == 1 ? "P5" : "P6") << '\n' << frame.width() << ' ' << frame.height() << '\n' << maxval << '\n';
  std::vector<unsigned char> data;
  data.reserve(static_cast<size_t>(frame.width()) * frame.height() * channels * (depth / 8));
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x)
      for (int c = 0; c < channels; ++c) {
        const double v = frame.valid(y, x) ? frame.channels[c](y, x) : 0.0;
        const unsigned q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
        if (depth == 16) data.push_back(static_cast<unsigned char>(q >> 8));
        data.push_back(static_cast<unsigned char>(q & 0xff));
      }
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw ProcessingError("cannot write " + path.string());
}

bool is_frame_file(const fs::path& p) {
  const std::string e = lower_ext(p);
  return e == ".png" || e == ".pgm" || e == ".ppm";
}

}  // namespace

Frame read_frame(const fs::path& path, FrameEncoding* encoding) {
  if (!fs::is_regular_file(path)) throw InputError("missing frame file " + path.string());
  const std::string e = lower_ext(path);
  if (e == ".png") return read_png(path, encoding);
  if (e == ".pgm" || e == ".ppm") return read_pnm(path, encoding);
  throw InputError("unsupported frame format " + path.string());
}

void write_frame(const fs::path& path, const Frame& frame, const FrameEncoding& encoding) {
  if (frame.channel_count() != 1 && frame.channel_count() != 3)
    throw InputError("frames must have 1 or 3 channels");
  if (encoding.bit_depth != 8 && encoding.bit_depth != 16) throw InputError("bit depth must be 8 or 16");
  if (encoding.format == FrameFormat::Png)
    write_png(path, frame, encoding.bit_depth);
  else
    write_pnm(path, frame, encoding.bit_depth);
}

FrameDirectory read_frame_dir(const fs::path& dir, size_t min_frames) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_frame_file(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.size() < min_frames)
    throw InputError(dir.string() + " holds " + std::to_string(files.size()) + " frames, need at least " +
                     std::to_string(min_frames));
  FrameDirectory out;
  for (size_t i = 0; i < files.size(); ++i) {
    FrameEncoding enc;
    Frame f = read_frame(files[i], &enc);
    if (i == 0) {
      out.encoding = enc;
    } else {
      const Frame& first = out.frames.front();
      if (f.height() != first.height() || f.width() != first.width() ||
          f.channel_count() != first.channel_count())
        throw InputError("dimension mismatch at frame " + files[i].filename().string());
    }
    out.frames.push_back(std::move(f));
    out.names.push_back(files[i].filename().string());
  }
  return out;
}

void write_frame_dir(const fs::path& dir, const FrameSequence& frames, const std::vector<std::string>& names,
                     const FrameEncoding& encoding) {
  if (frames.size() != names.size()) throw InputError("need one name per frame");
  fs::create_directories(dir);
  const std::string ext = encoding.format == FrameFormat::Png
                              ? ".png"
                              : (frames.empty() || frames.front().channel_count() == 1 ? ".pgm" : ".ppm");
  for (size_t i = 0; i < frames.size(); ++i) {
    fs::path p = dir / names[i];
    p.replace_extension(ext);
    write_frame(p, frames[i], encoding);
  }
}

std::vector<std::string> numbered_names(size_t count, const FrameEncoding& encoding) {
  std::vector<std::string> names;
  char buf[32];
  for (size_t i = 0; i < count; ++i) {
    std::snprintf(buf, sizeof buf, "frame_%05zu%s", i, encoding.format == FrameFormat::Png ? ".png" : ".pgm");
    names.emplace_back(buf);
  }
  return names;
}

}  // namespace dctstab
