#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace eventfeat {

// Timestamps are microseconds; the on-disk record holds 23 bits of them.
inline constexpr std::uint64_t kMaxTimestampUs = (1u << 23) - 1;
inline constexpr std::size_t kEventRecordBytes = 5;

struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint64_t t = 0;
  std::int8_t polarity = 1;  // +1 or -1

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  int n_x = 1;
  int n_y = 1;

  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

struct EventStream {
  SensorGeometry geometry;
  std::vector<Event> events;

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

// Log-brightness threshold model of a single event pixel array.
struct CameraModel {
  double contrast_threshold = 0.2;
  // Per-pixel log-brightness at which each pixel last fired, n_y x n_x.
  Eigen::MatrixXd reference;
};

// Polarity bit convention of the record layout (bit 7 of byte 2).
std::int8_t decode_polarity(std::uint8_t byte2);
std::uint8_t encode_polarity(std::int8_t polarity);

// Decodes 5-byte records: x, y, [p:1 | t:23 big-endian]. Out-of-order
// timestamps are tolerated and stable-sorted.
EventStream parse_event_file(std::span<const std::uint8_t> bytes, SensorGeometry geometry);

std::vector<std::uint8_t> write_event_file(const EventStream& stream);

// Emits one event per crossed multiple of the contrast threshold along the
// piecewise-linear per-pixel log-brightness trace through `frames`. Changes
// between the camera reference and the first frame fire at frame_times[0].
EventStream synthesize_events(std::span<const Eigen::MatrixXd> frames,
                              std::span<const std::uint64_t> frame_times,
                              const CameraModel& camera);

// Checks the EventStream invariants; throws on the first violation.
void validate_stream(const EventStream& stream);

// Integer pooling of pixel coordinates (x / factor, y / factor).
EventStream downsample(const EventStream& stream, int factor);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace eventfeat
