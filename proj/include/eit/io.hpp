#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "eit/deeponet.hpp"
#include "eit/fem.hpp"
#include "eit/phantom.hpp"

namespace eit {

// Binary frame format: 16-byte header (magic EITF, u16 version, u16 flags
// with bit 0 = is_difference, u32 M, f32 noise level), then M*(M-3)
// little-endian doubles.
void write_frame(std::ostream& out, const MeasurementFrame& frame, int M);
MeasurementFrame read_frame(std::istream& in, int* M_out = nullptr);
void save_frame(const MeasurementFrame& frame, int M, const std::string& path);
MeasurementFrame load_frame(const std::string& path, int* M_out = nullptr);

// One frame per line.
void write_frame_csv(std::ostream& out, const MeasurementFrame& frame);

struct DatasetHeader {
    std::uint64_t mesh_id = 0;
    std::uint32_t M = 0;
    std::uint32_t counts[4] = {0, 0, 0, 0};  // records per anomaly class
    std::uint64_t seed = 0;
    std::string config_json;
};

struct DatasetRecord {
    Phantom phantom;
    MeasurementFrame clean;
    MeasurementFrame difference;
};

// Dataset container: magic EITD + version + header + fixed-size records, so
// generation can resume at the first missing record. A trailing partial
// record is reported, not silently dropped.
class DatasetWriter {
public:
    DatasetWriter(const std::string& path, const DatasetHeader& header);
    // Opens an existing file for appending after validating the header;
    // n_existing() tells the caller where to resume.
    DatasetWriter(const std::string& path, const DatasetHeader& header, bool resume);
    ~DatasetWriter();

    std::int64_t n_existing() const { return n_existing_; }
    void append(const DatasetRecord& record);
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::int64_t n_existing_ = 0;
};

struct Dataset {
    DatasetHeader header;
    std::vector<DatasetRecord> records;
};

Dataset load_dataset(const std::string& path);
std::int64_t count_dataset_records(const std::string& path, DatasetHeader* header_out);

// DeepONet checkpoint: nn checkpoint core (branch blocks, trunk blocks, bias0
// as a scalar record) followed by a length-prefixed JSON metadata block with
// the normalization statistics, threshold, mesh fingerprint and training
// provenance.
void save_model(const DeepONetModel& model, const std::string& path,
                const std::string& config_json);
DeepONetModel load_model(const std::string& path, std::string* config_json_out = nullptr);

}  // namespace eit
