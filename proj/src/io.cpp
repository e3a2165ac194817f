#include "eit/io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace eit {

namespace {

using nlohmann::json;

void put_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t get_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

float get_f32(std::istream& in) {
    const std::uint32_t bits = get_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void put_doubles(std::ostream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

void get_doubles(std::istream& in, double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
}

constexpr std::uint32_t kDatasetVersion = 1;
constexpr int kMaxAnomalies = 4;

// phantom is stored fixed-size: count + 4 * (cx, cy, r, v)
void put_phantom(std::ostream& out, const Phantom& phantom) {
    put_u32(out, static_cast<std::uint32_t>(phantom.anomalies.size()));
    for (int i = 0; i < kMaxAnomalies; ++i) {
        double rec[4] = {0.0, 0.0, 0.0, 0.0};
        if (i < static_cast<int>(phantom.anomalies.size())) {
            const auto& a = phantom.anomalies[static_cast<std::size_t>(i)];
            rec[0] = a.center.x;
            rec[1] = a.center.y;
            rec[2] = a.radius;
            rec[3] = a.value;
        }
        put_doubles(out, rec, 4);
    }
}

Phantom get_phantom(std::istream& in) {
    Phantom phantom;
    const std::uint32_t n = get_u32(in);
    if (n > kMaxAnomalies) throw std::runtime_error("dataset: bad anomaly count");
    for (int i = 0; i < kMaxAnomalies; ++i) {
        double rec[4];
        get_doubles(in, rec, 4);
        if (i < static_cast<int>(n))
            phantom.anomalies.push_back({{rec[0], rec[1]}, rec[2], rec[3]});
    }
    return phantom;
}

std::size_t frame_bytes(int M) {
    return 16 + static_cast<std::size_t>(M) * (M - 3) * 8;
}

std::size_t record_bytes(int M) {
    return 4 + 4 * kMaxAnomalies * 8 + 2 * frame_bytes(M);
}

void write_dataset_header(std::ostream& out, const DatasetHeader& header) {
    out.write("EITD", 4);
    put_u32(out, kDatasetVersion);
    put_u64(out, header.mesh_id);
    put_u32(out, header.M);
    for (int i = 0; i < 4; ++i) put_u32(out, header.counts[i]);
    put_u64(out, header.seed);
    put_u32(out, static_cast<std::uint32_t>(header.config_json.size()));
    out.write(header.config_json.data(),
              static_cast<std::streamsize>(header.config_json.size()));
}

DatasetHeader read_dataset_header(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "EITD", 4) != 0)
        throw std::runtime_error("dataset: bad magic");
    if (get_u32(in) != kDatasetVersion)
        throw std::runtime_error("dataset: unsupported version");
    DatasetHeader header;
    header.mesh_id = get_u64(in);
    header.M = get_u32(in);
    for (int i = 0; i < 4; ++i) header.counts[i] = get_u32(in);
    header.seed = get_u64(in);
    const std::uint32_t json_len = get_u32(in);
    header.config_json.resize(json_len);
    in.read(header.config_json.data(), json_len);
    if (!in) throw std::runtime_error("dataset: truncated header");
    return header;
}

std::size_t header_bytes(const DatasetHeader& header) {
    return 4 + 4 + 8 + 4 + 16 + 8 + 4 + header.config_json.size();
}

}  // namespace

void write_frame(std::ostream& out, const MeasurementFrame& frame, int M) {
    if (frame.values.size() != static_cast<Eigen::Index>(M) * (M - 3))
        throw std::invalid_argument("write_frame: frame length does not match M");
    out.write("EITF", 4);
    put_u16(out, 1);  // version
    put_u16(out, frame.is_difference ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(M));
    put_f32(out, static_cast<float>(frame.noise_level));
    put_doubles(out, frame.values.data(), static_cast<std::size_t>(frame.values.size()));
    if (!out) throw std::runtime_error("write_frame: write failed");
}

MeasurementFrame read_frame(std::istream& in, int* M_out) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "EITF", 4) != 0)
        throw std::runtime_error("read_frame: bad magic");
    if (get_u16(in) != 1) throw std::runtime_error("read_frame: unsupported version");
    const std::uint16_t flags = get_u16(in);
    const int M = static_cast<int>(get_u32(in));
    if (M < 4 || M > 4096) throw std::runtime_error("read_frame: implausible M");
    MeasurementFrame frame;
    frame.is_difference = (flags & 1u) != 0;
    frame.noise_level = static_cast<double>(get_f32(in));
    frame.values.resize(static_cast<Eigen::Index>(M) * (M - 3));
    get_doubles(in, frame.values.data(), static_cast<std::size_t>(frame.values.size()));
    if (!in) throw std::runtime_error("read_frame: truncated stream");
    if (M_out) *M_out = M;
    return frame;
}

void save_frame(const MeasurementFrame& frame, int M, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_frame: cannot open " + path);
    write_frame(out, frame, M);
}

MeasurementFrame load_frame(const std::string& path, int* M_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_frame: cannot open " + path);
    return read_frame(in, M_out);
}

void write_frame_csv(std::ostream& out, const MeasurementFrame& frame) {
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < frame.values.size(); ++i) {
        if (i) out << ",";
        out << frame.values[i];
    }
    out << "\n";
}

struct DatasetWriter::Impl {
    std::ofstream out;
    int M = 0;
};

DatasetWriter::DatasetWriter(const std::string& path, const DatasetHeader& header)
    : DatasetWriter(path, header, false) {}

DatasetWriter::DatasetWriter(const std::string& path, const DatasetHeader& header,
                             bool resume)
    : impl_(std::make_unique<Impl>()) {
    impl_->M = static_cast<int>(header.M);
    namespace fs = std::filesystem;
    if (resume && fs::exists(path) && fs::file_size(path) > 0) {
        {
            std::ifstream in(path, std::ios::binary);
            const DatasetHeader existing = read_dataset_header(in);
            if (existing.mesh_id != header.mesh_id || existing.M != header.M ||
                existing.seed != header.seed ||
                existing.config_json != header.config_json ||
                std::memcmp(existing.counts, header.counts, sizeof(header.counts)) != 0)
                throw std::runtime_error(
                    "dataset resume: existing file was generated with a different config");
        }
        const std::size_t payload = fs::file_size(path) - header_bytes(header);
        if (payload % record_bytes(impl_->M) != 0)
            throw std::runtime_error("dataset resume: trailing partial record detected");
        n_existing_ = static_cast<std::int64_t>(payload / record_bytes(impl_->M));
        impl_->out.open(path, std::ios::binary | std::ios::app);
        if (!impl_->out) throw std::runtime_error("dataset: cannot append to " + path);
    } else {
        impl_->out.open(path, std::ios::binary | std::ios::trunc);
        if (!impl_->out) throw std::runtime_error("dataset: cannot open " + path);
        write_dataset_header(impl_->out, header);
    }
}

DatasetWriter::~DatasetWriter() = default;

void DatasetWriter::append(const DatasetRecord& record) {
    put_phantom(impl_->out, record.phantom);
    write_frame(impl_->out, record.clean, impl_->M);
    write_frame(impl_->out, record.difference, impl_->M);
    if (!impl_->out) throw std::runtime_error("dataset: write failed");
}

void DatasetWriter::close() {
    impl_->out.close();
    if (impl_->out.fail()) throw std::runtime_error("dataset: close failed");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    Dataset ds;
    ds.header = read_dataset_header(in);
    const std::size_t payload =
        std::filesystem::file_size(path) - header_bytes(ds.header);
    const std::size_t rec_size = record_bytes(static_cast<int>(ds.header.M));
    if (payload % rec_size != 0)
        throw std::runtime_error("load_dataset: trailing partial record");
    const std::size_t n = payload / rec_size;
    ds.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        DatasetRecord rec;
        rec.phantom = get_phantom(in);
        rec.clean = read_frame(in);
        rec.difference = read_frame(in);
        ds.records.push_back(std::move(rec));
    }
    if (!in) throw std::runtime_error("load_dataset: truncated file");
    return ds;
}

std::int64_t count_dataset_records(const std::string& path, DatasetHeader* header_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("count_dataset_records: cannot open " + path);
    const DatasetHeader header = read_dataset_header(in);
    const std::size_t payload =
        std::filesystem::file_size(path) - header_bytes(header);
    if (header_out) *header_out = header;
    return static_cast<std::int64_t>(payload / record_bytes(static_cast<int>(header.M)));
}

void save_model(const DeepONetModel& model, const std::string& path,
                const std::string& config_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    nn::write_checkpoint(out, {&model.branch, &model.trunk}, {model.bias0});

    json meta;
    meta["format_version"] = 1;
    meta["norm_mean"] = std::vector<double>(model.norm_mean.data(),
                                            model.norm_mean.data() + model.norm_mean.size());
    meta["norm_std"] = std::vector<double>(model.norm_std.data(),
                                           model.norm_std.data() + model.norm_std.size());
    meta["threshold"] = model.threshold;
    meta["mesh_id"] = model.mesh_id;
    if (!config_json.empty()) meta["config"] = json::parse(config_json);
    const std::string blob = meta.dump();
    put_u32(out, static_cast<std::uint32_t>(blob.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("save_model: write failed");
}

DeepONetModel load_model(const std::string& path, std::string* config_json_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    DeepONetModel model = make_deeponet(0);
    std::vector<double> scalars(1);
    nn::read_checkpoint(in, {&model.branch, &model.trunk}, scalars);
    model.bias0 = scalars[0];

    const std::uint32_t blob_len = get_u32(in);
    std::string blob(blob_len, '\0');
    in.read(blob.data(), blob_len);
    if (!in) throw std::runtime_error("load_model: truncated metadata");
    const json meta = json::parse(blob);
    if (meta.at("format_version").get<int>() != 1)
        throw std::runtime_error("load_model: unsupported metadata version");
    const auto mean = meta.at("norm_mean").get<std::vector<double>>();
    const auto stdv = meta.at("norm_std").get<std::vector<double>>();
    if (static_cast<int>(mean.size()) != model.frame_size() ||
        static_cast<int>(stdv.size()) != model.frame_size())
        throw std::runtime_error("load_model: normalization size mismatch");
    model.norm_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                                        static_cast<Eigen::Index>(mean.size()));
    model.norm_std = Eigen::Map<const Eigen::VectorXd>(stdv.data(),
                                                       static_cast<Eigen::Index>(stdv.size()));
    model.threshold = meta.at("threshold").get<double>();
    model.mesh_id = meta.at("mesh_id").get<std::uint64_t>();
    if (config_json_out)
        *config_json_out = meta.contains("config") ? meta.at("config").dump() : "";
    return model;
}

}  // namespace eit
