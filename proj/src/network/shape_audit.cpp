#include "contextstrip/network/shape_audit.hpp"

#include <iomanip>
#include <sstream>

namespace cstrip::net {

namespace {

struct Counter {
  std::int64_t trainable = 0;
  std::int64_t buffers = 0;

  void conv(std::int64_t out, std::int64_t in, std::int64_t k) { trainable += out * in * k * k + out; }
  /// 1x1 projection followed by batch norm; carries no bias.
  void projection(std::int64_t out, std::int64_t in) {
    trainable += out * in;
    bn(out);
  }
  void bn(std::int64_t c) {
    trainable += 2 * c;
    buffers += 2 * c;
  }
  std::int64_t dense_block(std::int64_t in, const ArchConfig& cfg) {
    std::int64_t c = in;
    for (int j = 0; j < cfg.block_layers; ++j) {
      bn(c);
      // Every consumer normalizes per channel, so the conv carries no bias.
      trainable += cfg.growth_rate() * c * 9;
      c += cfg.growth_rate();
    }
    return c;
  }
};

void audit_encoder(ShapeAudit& audit, Counter& count, const std::string& path,
                   std::int64_t in_channels, const ArchConfig& cfg) {
  std::int64_t c = in_channels;
  int extent = cfg.input_hw;
  for (int s = 0; s < cfg.stages; ++s) {
    const std::int64_t block = count.dense_block(c, cfg);
    count.projection(cfg.stage_channels(s), block);
    audit.rows.push_back({path, s, c, block, cfg.stage_channels(s), extent});
    c = cfg.stage_channels(s);
    extent /= 2;
  }
}

}  // namespace

ShapeAudit audit_shapes(const ArchConfig& cfg) {
  cfg.validate();
  ShapeAudit audit;
  Counter count;
  audit_encoder(audit, count, "enc2d", 1, cfg);
  audit_encoder(audit, count, "enc3d", cfg.depth, cfg);

  const std::int64_t cb = cfg.bottleneck_channels();
  const int h = cfg.bottleneck_extent();
  count.projection(cb, 2 * cb);
  audit.rows.push_back({"fuse", cfg.stages, 2 * cb, 0, cb, h});

  count.trainable += static_cast<std::int64_t>(cfg.codewords) * cb + cfg.codewords;
  count.bn(cfg.codewords);
  count.trainable += cb * cb + cb;
  count.trainable += cb * cfg.classes + cfg.classes;

  std::int64_t c = cb;
  int extent = h;
  for (int s = cfg.stages - 1; s >= 0; --s) {
    extent *= 2;
    const std::int64_t in = c + cfg.stage_channels(s);
    const std::int64_t block = count.dense_block(in, cfg);
    count.projection(cfg.stage_channels(s), block);
    audit.rows.push_back({"dec", s, in, block, cfg.stage_channels(s), extent});
    c = cfg.stage_channels(s);
  }
  count.conv(cfg.classes, c, 1);
  audit.rows.push_back({"classifier", 0, c, 0, cfg.classes, extent});

  audit.trainable_parameters = count.trainable;
  audit.buffer_values = count.buffers;
  return audit;
}

std::string format_audit(const ShapeAudit& audit) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "path" << std::right << std::setw(6) << "stage"
     << std::setw(8) << "in" << std::setw(8) << "block" << std::setw(8) << "out" << std::setw(8)
     << "extent" << '\n';
  for (const auto& row : audit.rows) {
    os << std::left << std::setw(12) << row.path << std::right << std::setw(6) << row.stage
       << std::setw(8) << row.in_channels << std::setw(8) << row.block_channels << std::setw(8)
       << row.out_channels << std::setw(8) << row.extent << '\n';
  }
  os << "trainable parameters: " << audit.trainable_parameters << '\n';
  os << "buffer values: " << audit.buffer_values << '\n';
  return os.str();
}

}  // namespace cstrip::net
