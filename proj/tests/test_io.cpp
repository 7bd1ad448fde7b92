#include <cstring>
#include <fstream>
#include <functional>

#include <gtest/gtest.h>

#include "benq/benq_file.hpp"
#include "benq/file_util.hpp"
#include "benq/safetensors.hpp"
#include "benq/synth.hpp"
#include "tmpdir.hpp"

using namespace benq;
namespace fs = std::filesystem;

namespace {

void write_raw(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string safetensors_bytes(const std::string& header, const std::string& data) {
    std::string out(8, '\0');
    const std::uint64_t n = header.size();
    std::memcpy(out.data(), &n, 8);
    return out + header + data;
}

NamedTensors toy_model() {
    NamedTensors m;
    m.push_back(WeightTensor::from_values("layers.0.attn.q_proj.weight", {0, 4}, {}));
    m.push_back(synth_tensor("layers.0.attn.k_proj.weight", SynthSpec::parse("lognormal:-3:1.5:12x10"), 2));
    m.push_back(synth_tensor("layers.0.mlp.up_proj.weight", SynthSpec::parse("gaussian:0.02:7x9"), 3));
    m.push_back(synth_tensor("layers.0.norm.weight", SynthSpec::parse("uniform:0.9:1.1:10"), 4));
    auto half = WeightTensor::from_values_f16("embed.weight", {5, 3}, synth_values(SynthSpec::gaussian(1, 15), 5));
    m.push_back(half);
    return m;
}

MixedModel toy_mixed(const QuantConfig& c) { return apply_policy(toy_model(), QuantPolicy::selective(), c).model; }

// Rewrites the header through `edit` and re-signs it.
void resign_header(const fs::path& p, const std::function<void(nlohmann::json&)>& edit) {
    const std::string bytes = read_file(p);
    std::uint64_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + 8, 8);
    auto header = nlohmann::json::parse(bytes.substr(16, hlen));
    header.erase("header_digest");
    edit(header);
    header["header_digest"] = fnv1a64_hex(header.dump());
    std::string text = header.dump();
    while ((16 + text.size()) % 8 != 0) text.push_back(' ');
    std::string out = bytes.substr(0, 8);
    const std::uint64_t n = text.size();
    out.append(reinterpret_cast<const char*>(&n), 8);
    write_raw(p, out + text + bytes.substr(16 + hlen));
}

}  // namespace

TEST(Safetensors, RoundTripAllDtypes) {
    TempDir dir;
    NamedTensors ts;
    ts.push_back(WeightTensor::from_values("b", {2, 2}, std::vector<float>{1.0f, -2.5f, 0.0f, 3e-5f}));
    ts.push_back(WeightTensor::from_values_f16("a", {3}, std::vector<float>{1.0f, 0.333333f, -65504.0f}));
    WeightTensor bf{"c", {2}, DType::BF16, {}};
    for (std::uint16_t v : {0x3f80, 0xc040}) {  // 1.0, -3.0
        bf.data.push_back(static_cast<std::byte>(v & 0xff));
        bf.data.push_back(static_cast<std::byte>(v >> 8));
    }
    ts.push_back(bf);
    write_container(dir / "m.safetensors", ts, {{"format", "pt"}});

    const auto c = read_container(dir / "m.safetensors");
    ASSERT_EQ(c.tensors.size(), 3u);
    EXPECT_EQ(c.tensors[0].name, "a");
    EXPECT_EQ(c.tensors[0].dtype, DType::F16);
    EXPECT_EQ(c.tensors[0].values()[1], half_to_float(float_to_half(0.333333f)));
    EXPECT_EQ(c.tensors[0].values()[2], -65504.0f);
    EXPECT_EQ(c.tensors[1], ts[0]);
    EXPECT_EQ(c.tensors[2].values(), (std::vector<float>{1.0f, -3.0f}));
    EXPECT_EQ(c.metadata.at("format"), "pt");
    EXPECT_TRUE(c.warnings.empty());
}

TEST(Safetensors, EmptyContainerWarns) {
    TempDir dir;
    write_raw(dir / "e.safetensors", safetensors_bytes("{}      ", ""));
    const auto c = read_container(dir / "e.safetensors");
    EXPECT_TRUE(c.tensors.empty());
    EXPECT_EQ(c.warnings.size(), 1u);
}

TEST(Safetensors, RejectsBadInput) {
    TempDir dir;
    const auto p = dir / "bad.safetensors";
    const std::string f32x2(8, '\0');
    const std::vector<std::pair<std::string, std::string>> cases = {
        {R"({"w":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}})", f32x2.substr(0, 4)},  // truncated
        {R"({"w":{"dtype":"I8","shape":[8],"data_offsets":[0,8]}})", f32x2},                 // dtype
        {R"({"w":{"dtype":"F32","shape":[3],"data_offsets":[0,8]}})", f32x2},                // size
        {R"({"w":{"dtype":"F32","shape":[2]}})", f32x2},                                     // offsets
        {R"({"w":{"dtype":"F32","shape":[2],"data_offsets":[0,8]})", f32x2},                 // json
        {R"([1,2])", ""},
    };
    for (const auto& [h, d] : cases) {
        write_raw(p, safetensors_bytes(h, d));
        EXPECT_THROW(read_container(p), IoError) << h;
    }
    write_raw(p, "abc");
    EXPECT_THROW(read_container(p), IoError);
    std::string huge(8, '\xff');
    write_raw(p, huge + "{}");
    EXPECT_THROW(read_container(p), IoError);
    EXPECT_THROW(read_container(dir / "missing.safetensors"), IoError);
}

TEST(PackIndices, RoundTripAndLayout) {
    const std::vector<std::uint8_t> codes = {1, 2, 15, 0, 7};
    const auto packed = pack_indices(codes, 4);
    ASSERT_EQ(packed.size(), 3u);
    EXPECT_EQ(packed[0], std::byte{0x21});  // low nibble first
    EXPECT_EQ(packed[2], std::byte{0x07});
    EXPECT_EQ(unpack_indices(packed, codes.size(), 4), codes);

    auto bad = packed;
    bad[2] = std::byte{0x17};  // nonzero pad nibble
    EXPECT_THROW(unpack_indices(bad, codes.size(), 4), CorruptionError);
    EXPECT_THROW(unpack_indices(packed, codes.size(), 2), CorruptionError);  // 15 out of range at 2 bits

    std::vector<std::uint8_t> wide(257);
    for (std::size_t i = 0; i < wide.size(); ++i) wide[i] = static_cast<std::uint8_t>(i * 37);
    EXPECT_EQ(pack_indices(wide, 8).size(), 257u);
    EXPECT_EQ(unpack_indices(pack_indices(wide, 8), 257, 8), wide);
    EXPECT_EQ(packed_index_bytes(1000, 3), 500u);
}

class BenqRoundTrip : public ::testing::TestWithParam<std::tuple<int, Schedule>> {};

TEST_P(BenqRoundTrip, ReadBackIsIdenticalAndRewriteIsByteIdentical) {
    const auto [bits, schedule] = GetParam();
    TempDir dir;
    const QuantConfig c{bits, 8, schedule, kDefaultEpsilon};
    const MixedModel m = toy_mixed(c);
    write_benq(m, dir / "a.benq");
    const MixedModel back = read_benq(dir / "a.benq");
    EXPECT_EQ(back, m);
    EXPECT_EQ(dequantize_model(back), dequantize_model(m));
    write_benq(back, dir / "b.benq");
    EXPECT_EQ(read_file(dir / "a.benq"), read_file(dir / "b.benq"));

    const std::string bytes = read_file(dir / "a.benq");
    EXPECT_EQ(bytes.substr(0, 4), "BNQ1");
    std::uint64_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + 8, 8);
    EXPECT_EQ((16 + hlen) % 8, 0u);
}

INSTANTIATE_TEST_SUITE_P(Bits, BenqRoundTrip,
                         ::testing::Combine(::testing::Values(2, 3, 4, 8),
                                            ::testing::Values(Schedule::LogUniform, Schedule::LinearNonUniform,
                                                              Schedule::UniformRTN)));

TEST(BenqFile, ThreeBitIndicesUseNibbles) {
    const QuantConfig c{3, 8, Schedule::LogUniform, kDefaultEpsilon};
    const auto layout = layout_benq(toy_mixed(c));
    for (const auto& t : layout.header.at("tensors")) {
        if (!t.at("quantized").get<bool>()) continue;
        const auto numel = shape_numel(t.at("shape").get<std::vector<std::uint64_t>>());
        EXPECT_EQ(t.at("indices")[1].get<std::uint64_t>(), (numel + 1) / 2);
        EXPECT_EQ(t.at("indices")[0].get<std::uint64_t>() % 8, 0u);
        EXPECT_EQ(t.at("scales")[0].get<std::uint64_t>() % 8, 0u);
    }
}

TEST(BenqFile, HeaderTamperIsDetected) {
    TempDir dir;
    const auto p = dir / "m.benq";
    write_benq(toy_mixed(QuantConfig{}), p);
    std::string bytes = read_file(p);
    const auto at = bytes.find("\"bits\":4");
    ASSERT_NE(at, std::string::npos);
    bytes[at + 7] = '3';
    write_raw(p, bytes);
    EXPECT_THROW(read_benq(p), CorruptionError);
}

TEST(BenqFile, PayloadTamperIsDetected) {
    TempDir dir;
    const auto p = dir / "m.benq";
    write_benq(toy_mixed(QuantConfig{}), p);
    std::string bytes = read_file(p);
    bytes[bytes.size() - 3] ^= 0x40;
    write_raw(p, bytes);
    EXPECT_THROW(read_benq(p), CorruptionError);

    write_benq(toy_mixed(QuantConfig{}), p);
    bytes = read_file(p);
    write_raw(p, bytes.substr(0, bytes.size() - 5));
    EXPECT_THROW(read_benq(p), CorruptionError);
}

TEST(BenqFile, SignedButInconsistentHeaders) {
    TempDir dir;
    const auto p = dir / "m.benq";
    write_benq(toy_mixed(QuantConfig{}), p);
    resign_header(p, [](nlohmann::json& h) { h["version"] = 2; });
    EXPECT_THROW(read_benq(p), IoError);

    write_benq(toy_mixed(QuantConfig{}), p);
    resign_header(p, [](nlohmann::json& h) { h["bits"] = 9; });
    EXPECT_THROW(read_benq(p), CorruptionError);

    write_benq(toy_mixed(QuantConfig{}), p);
    resign_header(p, [](nlohmann::json& h) { h["group_size"] = 16; });
    EXPECT_THROW(read_benq(p), CorruptionError);

    write_benq(toy_mixed(QuantConfig{}), p);
    resign_header(p, [](nlohmann::json& h) {
        for (auto& t : h["tensors"]) {
            if (t["quantized"].get<bool>()) t["indices"][0] = t["indices"][0].get<std::uint64_t>() + 1;
        }
    });
    EXPECT_THROW(read_benq(p), CorruptionError);
}

TEST(BenqFile, BadMagicAndTruncation) {
    TempDir dir;
    const auto p = dir / "x.benq";
    write_raw(p, "BNQ");
    EXPECT_THROW(read_benq(p), CorruptionError);
    write_raw(p, std::string("PK\x03\x04", 4) + std::string(20, '\0'));
    EXPECT_THROW(read_benq(p), IoError);
    EXPECT_THROW(read_benq(dir / "missing.benq"), IoError);
}

TEST(AtomicWrite, LeavesNoTempFiles) {
    TempDir dir;
    write_file_atomic(dir / "f.txt", "hello");
    {
        AtomicFileWriter w(dir / "g.txt");
        w.write(std::string_view("partial"));
        // no commit: destructor discards
    }
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir.path)) names.push_back(e.path().filename().string());
    EXPECT_EQ(names, std::vector<std::string>{"f.txt"});
    EXPECT_EQ(read_file(dir / "f.txt"), "hello");
}
