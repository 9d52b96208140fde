#include "eventfeat/event_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "eventfeat/error.hpp"

namespace eventfeat {

namespace {

bool sorted_by_time(const std::vector<Event>& events) {
  return std::is_sorted(events.begin(), events.end(),
                        [](const Event& a, const Event& b) { return a.t < b.t; });
}

void stable_sort_by_time(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
}

}  // namespace

std::int8_t decode_polarity(std::uint8_t byte2) { return (byte2 & 0x80) ? 1 : -1; }

std::uint8_t encode_polarity(std::int8_t polarity) { return polarity > 0 ? 0x80 : 0x00; }

EventStream parse_event_file(std::span<const std::uint8_t> bytes, SensorGeometry geometry) {
  if (geometry.n_x < 1 || geometry.n_y < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sensor geometry must be at least 1x1");
  }
  if (bytes.size() % kEventRecordBytes != 0) {
    throw Error(ErrorCode::kTruncatedRecord,
                "byte length " + std::to_string(bytes.size()) + " is not a multiple of 5");
  }
  EventStream stream;
  stream.geometry = geometry;
  const std::size_t count = bytes.size() / kEventRecordBytes;
  stream.events.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* r = bytes.data() + i * kEventRecordBytes;
    Event e;
    e.x = r[0];
    e.y = r[1];
    e.polarity = decode_polarity(r[2]);
    e.t = (static_cast<std::uint64_t>(r[2] & 0x7F) << 16) |
          (static_cast<std::uint64_t>(r[3]) << 8) | static_cast<std::uint64_t>(r[4]);
    if (e.x >= geometry.n_x || e.y >= geometry.n_y) {
      throw Error(ErrorCode::kCoordinateOutOfRange,
                  "record " + std::to_string(i) + ": (" + std::to_string(e.x) + ", " +
                      std::to_string(e.y) + ") outside " + std::to_string(geometry.n_x) + "x" +
                      std::to_string(geometry.n_y));
    }
    stream.events.push_back(e);
  }
  if (!sorted_by_time(stream.events)) stable_sort_by_time(stream.events);
  return stream;
}

std::vector<std::uint8_t> write_event_file(const EventStream& stream) {
  std::vector<std::uint8_t> out;
  out.reserve(stream.events.size() * kEventRecordBytes);
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.t > kMaxTimestampUs) {
      throw Error(ErrorCode::kTimestampOverflow,
                  "event " + std::to_string(i) + ": timestamp " + std::to_string(e.t) +
                      " exceeds 23 bits");
    }
    if (e.x > 0xFF || e.y > 0xFF) {
      throw Error(ErrorCode::kCoordinateOutOfRange,
                  "event " + std::to_string(i) + ": coordinate does not fit one byte");
    }
    out.push_back(static_cast<std::uint8_t>(e.x));
    out.push_back(static_cast<std::uint8_t>(e.y));
    out.push_back(static_cast<std::uint8_t>(encode_polarity(e.polarity) | ((e.t >> 16) & 0x7F)));
    out.push_back(static_cast<std::uint8_t>((e.t >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>(e.t & 0xFF));
  }
  return out;
}

EventStream synthesize_events(std::span<const Eigen::MatrixXd> frames,
                              std::span<const std::uint64_t> frame_times,
                              const CameraModel& camera) {
  if (!(camera.contrast_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "contrast threshold must be positive");
  }
  const Eigen::Index rows = camera.reference.rows();
  const Eigen::Index cols = camera.reference.cols();
  if (rows < 1 || cols < 1) {
    throw Error(ErrorCode::kShapeMismatch, "camera reference is empty");
  }
  if (frames.size() != frame_times.size()) {
    throw Error(ErrorCode::kShapeMismatch, "frame count differs from timestamp count");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].rows() != rows || frames[i].cols() != cols) {
      throw Error(ErrorCode::kShapeMismatch,
                  "frame " + std::to_string(i) + " does not match the reference shape");
    }
    if (i > 0 && frame_times[i] <= frame_times[i - 1]) {
      throw Error(ErrorCode::kNonMonotonicTimestamps,
                  "frame " + std::to_string(i) + " timestamp is not strictly increasing");
    }
  }

  EventStream stream;
  stream.geometry = SensorGeometry{static_cast<int>(cols), static_cast<int>(rows)};
  if (frames.empty()) return stream;

  const double c = camera.contrast_threshold;
  // Absorbs rounding in repeated reference += C so exact multiples fire.
  const double slack = 1e-9 * c;
  Eigen::MatrixXd level = camera.reference;

  auto fire = [&](const Eigen::MatrixXd& from, const Eigen::MatrixXd& to, std::uint64_t t_from,
                  std::uint64_t t_to) {
    const double span_us = static_cast<double>(t_to - t_from);
    for (Eigen::Index y = 0; y < rows; ++y) {
      for (Eigen::Index x = 0; x < cols; ++x) {
        const double start = from(y, x);
        const double end = to(y, x);
        double& ref = level(y, x);
        auto emit = [&](double crossing, std::int8_t polarity) {
          double frac = 1.0;
          if (end != start) frac = std::clamp((crossing - start) / (end - start), 0.0, 1.0);
          const auto t = static_cast<std::uint64_t>(
              std::llround(static_cast<double>(t_from) + frac * span_us));
          stream.events.push_back(Event{static_cast<std::uint16_t>(x),
                                        static_cast<std::uint16_t>(y), t, polarity});
        };
        while (end - ref >= c - slack) {
          ref += c;
          emit(ref, 1);
        }
        while (ref - end >= c - slack) {
          ref -= c;
          emit(ref, -1);
        }
      }
    }
  };

  fire(camera.reference, frames[0], frame_times[0], frame_times[0]);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    fire(frames[i - 1], frames[i], frame_times[i - 1], frame_times[i]);
  }
  stable_sort_by_time(stream.events);
  return stream;
}

void validate_stream(const EventStream& stream) {
  const auto& g = stream.geometry;
  if (g.n_x < 1 || g.n_y < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sensor geometry must be at least 1x1");
  }
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.x >= g.n_x || e.y >= g.n_y) {
      throw Error(ErrorCode::kCoordinateOutOfRange, "event " + std::to_string(i));
    }
    if (e.polarity != 1 && e.polarity != -1) {
      throw Error(ErrorCode::kInvalidArgument, "event " + std::to_string(i) + ": bad polarity");
    }
    if (i > 0 && e.t < stream.events[i - 1].t) {
      throw Error(ErrorCode::kNonMonotonicTimestamps, "event " + std::to_string(i));
    }
  }
}

EventStream downsample(const EventStream& stream, int factor) {
  if (factor < 1) throw Error(ErrorCode::kInvalidArgument, "downsample factor must be >= 1");
  if (factor == 1) return stream;
  EventStream out;
  out.geometry = SensorGeometry{(stream.geometry.n_x + factor - 1) / factor,
                                (stream.geometry.n_y + factor - 1) / factor};
  out.events.reserve(stream.events.size());
  for (Event e : stream.events) {
    e.x = static_cast<std::uint16_t>(e.x / factor);
    e.y = static_cast<std::uint16_t>(e.y / factor);
    out.events.push_back(e);
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path);
}

}  // namespace eventfeat
