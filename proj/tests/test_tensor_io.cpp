#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "support/oracles.hpp"
#include "tgiqa/error.hpp"
#include "tgiqa/tensor_io.hpp"

using namespace tgiqa;

namespace {

// numpy.save output, captured once from numpy 2.2.
const char* const kNumpy2x3 =
    "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a2046616c73652c2027736861"
    "7065273a2028322c2033292c207d2020202020202020202020202020202020202020202020202020202020202020202020202020202020"
    "20202020202020202020202020202020200a0000803f0000004000004040000080400000a0400000c040";
const char* const kNumpy1x1Zero =
    "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a2046616c73652c2027736861"
    "7065273a2028312c2031292c207d2020202020202020202020202020202020202020202020202020202020202020202020202020202020"
    "20202020202020202020202020202020200a00000000";
const char* const kNumpy0x3 =
    "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a2046616c73652c2027736861"
    "7065273a2028302c2033292c207d2020202020202020202020202020202020202020202020202020202020202020202020202020202020"
    "20202020202020202020202020202020200a";
const char* const kNumpy1d =
    "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a2046616c73652c2027736861"
    "7065273a2028322c292c207d20202020202020202020202020202020202020202020202020202020202020202020202020202020202020"
    "20202020202020202020202020202020200a0000c03f000000c0";

std::vector<std::uint8_t> npy_with_header(const std::string& dict, std::size_t payload_bytes) {
    std::string header = dict;
    while ((10 + header.size() + 1) % 64) header += ' ';
    header += '\n';
    std::vector<std::uint8_t> out{0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
    out.push_back(static_cast<std::uint8_t>(header.size() & 0xFF));
    out.push_back(static_cast<std::uint8_t>(header.size() >> 8));
    out.insert(out.end(), header.begin(), header.end());
    out.resize(out.size() + payload_bytes, 0);
    return out;
}

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::InvalidArgument;
}

}  // namespace

TEST(Npy, ZeroScalarMatrixParses) {
    const auto t = parse_npy(oracle::from_hex(kNumpy1x1Zero));
    EXPECT_EQ(t, TensorF32(1, 1, {0.0f}));
}

TEST(Npy, ParsesNumpyReferenceBytes) {
    const auto t = parse_npy(oracle::from_hex(kNumpy2x3));
    EXPECT_EQ(t, TensorF32(2, 3, {1, 2, 3, 4, 5, 6}));
}

TEST(Npy, WriterMatchesNumpyByteForByte) {
    EXPECT_EQ(write_npy(TensorF32(2, 3, {1, 2, 3, 4, 5, 6})), oracle::from_hex(kNumpy2x3));
    EXPECT_EQ(write_npy(TensorF32(1, 1, {0.0f})), oracle::from_hex(kNumpy1x1Zero));
    EXPECT_EQ(write_npy(TensorF32(0, 3)), oracle::from_hex(kNumpy0x3));
}

TEST(Npy, OneDimensionalLoadsAsSingleRow) {
    const auto t = parse_npy(oracle::from_hex(kNumpy1d));
    EXPECT_EQ(t, TensorF32(1, 2, {1.5f, -2.0f}));
}

TEST(Npy, EmptyTensorRoundTrips) {
    const TensorF32 empty(0, 3);
    const auto back = parse_npy(write_npy(empty));
    EXPECT_EQ(back.rows, 0u);
    EXPECT_EQ(back.cols, 3u);
}

TEST(Npy, HeaderIsPaddedTo64Bytes) {
    for (std::size_t r : {1u, 7u, 1000u}) {
        for (std::size_t c : {1u, 12u, 513u}) {
            const auto bytes = write_npy(TensorF32(r, c));
            const std::size_t header_len = bytes[8] | (bytes[9] << 8);
            EXPECT_EQ((10 + header_len) % 64, 0u);
            EXPECT_EQ(bytes[10 + header_len - 1], '\n');
            EXPECT_EQ(bytes.size(), 10 + header_len + 4 * r * c);
        }
    }
}

TEST(Npy, BadMagic) {
    auto bytes = oracle::from_hex(kNumpy2x3);
    bytes[5] = 'Z';
    EXPECT_EQ(code_of([&] { parse_npy(bytes); }), Errc::BadMagic);
    EXPECT_EQ(code_of([&] { parse_npy(std::vector<std::uint8_t>{0x93, 'N'}); }), Errc::BadMagic);
}

TEST(Npy, RejectsOtherDtypesOrdersAndShapes) {
    EXPECT_EQ(code_of([] { parse_npy(npy_with_header("{'descr': '<f8', 'fortran_order': False, 'shape': (1, 1), }", 8)); }),
              Errc::UnsupportedDtype);
    EXPECT_EQ(code_of([] { parse_npy(npy_with_header("{'descr': '>f4', 'fortran_order': False, 'shape': (1, 1), }", 4)); }),
              Errc::UnsupportedDtype);
    EXPECT_EQ(code_of([] { parse_npy(npy_with_header("{'descr': '<f4', 'fortran_order': True, 'shape': (2, 2), }", 16)); }),
              Errc::UnsupportedOrder);
    EXPECT_EQ(
        code_of([] { parse_npy(npy_with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2, 2), }", 32)); }),
        Errc::UnsupportedShape);
    EXPECT_EQ(code_of([] { parse_npy(npy_with_header("{'fortran_order': False, 'shape': (1, 1), }", 4)); }),
              Errc::UnsupportedDtype);
}

TEST(Npy, ErrorMessageNamesTheField) {
    try {
        parse_npy(npy_with_header("{'descr': '<i4', 'fortran_order': False, 'shape': (1, 1), }", 4));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("descr"), std::string::npos) << e.what();
    }
}

TEST(Npy, TruncatedPayload) {
    auto bytes = oracle::from_hex(kNumpy2x3);
    bytes.pop_back();
    EXPECT_EQ(code_of([&] { parse_npy(bytes); }), Errc::TruncatedPayload);
}

TEST(Npy, NeverReadsPastDeclaredPayload) {
    auto bytes = oracle::from_hex(kNumpy2x3);
    bytes.push_back(0xFF);
    bytes.push_back(0xFF);
    EXPECT_EQ(parse_npy(bytes), TensorF32(2, 3, {1, 2, 3, 4, 5, 6}));
}

TEST(Npy, NonFiniteRejectedUnlessPermissive) {
    TensorF32 t(1, 2, {1.0f, std::numeric_limits<float>::quiet_NaN()});
    const auto bytes = write_npy(t);
    EXPECT_EQ(code_of([&] { parse_npy(bytes); }), Errc::NonFinite);
    const auto loose = parse_npy(bytes, FiniteCheck::Allow);
    EXPECT_TRUE(std::isnan(loose.at(0, 1)));
}

TEST(Npy, RoundTripProperty) {
    std::mt19937_64 gen(7);
    std::uniform_int_distribution<int> dim(0, 9);
    std::uniform_real_distribution<float> val(-1e6f, 1e6f);
    for (int trial = 0; trial < 200; ++trial) {
        TensorF32 t(static_cast<std::size_t>(dim(gen)), static_cast<std::size_t>(dim(gen) + 1));
        for (auto& v : t.data) v = val(gen);
        EXPECT_EQ(parse_npy(write_npy(t)), t);
    }
}

TEST(Npy, FileRoundTrip) {
    const auto dir = oracle::temp_dir("npy");
    const TensorF32 t(3, 2, {1, 2, 3, 4, 5, 6});
    save_npy(t, dir / "sub" / "t.npy");
    EXPECT_EQ(load_npy(dir / "sub" / "t.npy"), t);
    EXPECT_EQ(code_of([&] { load_npy(dir / "missing.npy"); }), Errc::IoError);
}

TEST(TensorF32Type, LengthMustMatchShape) {
    EXPECT_EQ(code_of([] { TensorF32(2, 2, {1, 2, 3}); }), Errc::DimensionMismatch);
}

// --- manifests ---------------------------------------------------------------

TEST(Manifest, TwoLinesInOrder) {
    const auto m = parse_manifest(
        "{\"image_id\":\"a\",\"path\":\"a.pgm\",\"label\":3,\"corruption\":\"clean\",\"severity\":0}\n"
        "{\"image_id\":\"a\",\"path\":\"n/a.pgm\",\"label\":3,\"corruption\":\"gaussian_noise\",\"severity\":3}\n");
    ASSERT_EQ(m.size(), 2u);
    EXPECT_TRUE(m.entries[0].is_clean());
    EXPECT_EQ(m.entries[1].corruption, "gaussian_noise");
    EXPECT_EQ(m.entries[1].severity, 3);
}

TEST(Manifest, SeverityMismatch) {
    EXPECT_EQ(code_of([] {
                  parse_manifest("{\"image_id\":\"a\",\"path\":\"a\",\"label\":0,\"corruption\":\"clean\",\"severity\":2}");
              }),
              Errc::SeverityMismatch);
    EXPECT_EQ(code_of([] {
                  parse_manifest("{\"image_id\":\"a\",\"path\":\"a\",\"label\":0,\"corruption\":\"blur\",\"severity\":0}");
              }),
              Errc::SeverityMismatch);
    EXPECT_EQ(code_of([] {
                  parse_manifest("{\"image_id\":\"a\",\"path\":\"a\",\"label\":0,\"corruption\":\"blur\",\"severity\":6}");
              }),
              Errc::SeverityMismatch);
}

TEST(Manifest, DuplicateKey) {
    const std::string line = "{\"image_id\":\"a\",\"path\":\"a\",\"label\":0,\"corruption\":\"clean\",\"severity\":0}\n";
    EXPECT_EQ(code_of([&] { parse_manifest(line + line); }), Errc::DuplicateKey);
}

TEST(Manifest, MalformedLineNamesLineNumber) {
    const std::string good = "{\"image_id\":\"a\",\"path\":\"a\",\"label\":0,\"corruption\":\"clean\",\"severity\":0}\n";
    for (const std::string bad : {"{not json}", "{\"image_id\":\"b\"}", "[1,2]",
                                  "{\"image_id\":\"b\",\"path\":\"b\",\"label\":\"x\",\"corruption\":\"clean\","
                                  "\"severity\":0}"}) {
        try {
            parse_manifest(good + bad + "\n");
            FAIL() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::MalformedLine);
            EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
        }
    }
}

TEST(Manifest, FiftyThousandCleanEntries) {
    DatasetManifest m;
    for (int i = 0; i < 50000; ++i) m.entries.push_back({"img" + std::to_string(i), "x.pgm", i % 1000});
    const auto back = parse_manifest(format_manifest(m));
    ASSERT_EQ(back.size(), 50000u);
    for (const auto& e : back.entries) EXPECT_EQ(e.severity, 0);
    EXPECT_EQ(back, m);
}

TEST(Manifest, FileRoundTripAndBlankLines) {
    const auto dir = oracle::temp_dir("manifest");
    DatasetManifest m;
    m.entries.push_back({"x", "x.ppm", 1});
    m.entries.push_back({"x", "blur/1/x.ppm", 1, "gaussian_blur", 1});
    save_manifest(m, dir / "m.jsonl");
    EXPECT_EQ(load_manifest(dir / "m.jsonl"), m);
    EXPECT_EQ(parse_manifest("\n" + format_manifest(m) + "\n\n"), m);
}

TEST(Manifest, Alignment) {
    DatasetManifest m;
    m.entries.push_back({"a", "a", 0});
    m.entries.push_back({"b", "b", 0});
    EXPECT_NO_THROW(check_alignment(TensorF32(2, 4), m, "z"));
    EXPECT_EQ(code_of([&] { check_alignment(TensorF32(3, 4), m, "z"); }), Errc::AlignmentError);
}

// --- score / correctness tables ---------------------------------------------

TEST(Scores, EmptyTableIsHeaderOnly) {
    EXPECT_EQ(format_scores(ScoreTable{}), "image_id,corruption,severity,metric,value\n");
    EXPECT_TRUE(parse_scores("image_id,corruption,severity,metric,value\n").records.empty());
}

TEST(Scores, NineSignificantDigits) {
    ScoreTable t;
    t.add({"img1"}, "clip-iqa", 0.567);
    EXPECT_EQ(format_scores(t), "image_id,corruption,severity,metric,value\nimg1,clean,0,clip-iqa,0.567000000\n");
    EXPECT_EQ(format_score_value(1234.5), "1234.50000");
    EXPECT_EQ(format_score_value(-2.0e-7), "-2.00000000e-07");
}

TEST(Scores, SeventyFiveGroupRoundTrip) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> noise;
    ScoreTable t;
    for (int c = 0; c < 15; ++c) {
        for (int s = 1; s <= 5; ++s) {
            for (int i = 0; i < 4; ++i) {
                // Values that already carry 9 significant digits round-trip exactly.
                const double v = std::stod(format_score_value(noise(gen)));
                t.add({"id" + std::to_string(i), "c" + std::to_string(c), s}, "tv", v);
            }
        }
    }
    EXPECT_EQ(parse_scores(format_scores(t)), t);
}

TEST(Scores, WriteParseIsStableForArbitraryDoubles) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    ScoreTable t;
    for (int i = 0; i < 500; ++i) t.add({"id" + std::to_string(i)}, "m", u(gen));
    const auto once = format_scores(parse_scores(format_scores(t)));
    EXPECT_EQ(format_scores(parse_scores(once)), once);
    const auto back = parse_scores(format_scores(t));
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        EXPECT_NEAR(back.records[i].value, t.records[i].value, 1e-8 * std::abs(t.records[i].value));
    }
}

TEST(Scores, Errors) {
    const std::string h = "image_id,corruption,severity,metric,value\n";
    EXPECT_EQ(code_of([&] { parse_scores(h + "a,clean,0,tv\n"); }), Errc::MalformedRow);
    EXPECT_EQ(code_of([&] { parse_scores(h + "a,clean,zero,tv,1\n"); }), Errc::MalformedRow);
    EXPECT_EQ(code_of([&] { parse_scores(h + "a,clean,0,tv,abc\n"); }), Errc::MalformedRow);
    EXPECT_EQ(code_of([&] { parse_scores("id,value\n"); }), Errc::MalformedRow);
    EXPECT_EQ(code_of([&] { parse_scores(h + "a,clean,0,tv,1\na,clean,0,tv,2\n"); }), Errc::DuplicateKey);
    ScoreTable t;
    t.add({"a"}, "tv", 1);
    t.add({"a"}, "tv", 2);
    EXPECT_EQ(code_of([&] { format_scores(t); }), Errc::DuplicateKey);
    ScoreTable bad;
    bad.records.push_back({{"a,b"}, "tv", 1});
    EXPECT_EQ(code_of([&] { format_scores(bad); }), Errc::MalformedRow);
}

TEST(Scores, MalformedRowNamesLine) {
    try {
        parse_scores("image_id,corruption,severity,metric,value\na,clean,0,tv,1\nb,clean,0,tv\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
    }
}

TEST(Correctness, RoundTripAndValidation) {
    CorrectnessTable t;
    t.add({"a"}, "resnet", 1);
    t.add({"a", "gaussian_blur", 2}, "resnet", 0);
    const auto text = format_correctness(t);
    EXPECT_EQ(text, "image_id,corruption,severity,model,correct\na,clean,0,resnet,1\na,gaussian_blur,2,resnet,0\n");
    EXPECT_EQ(parse_correctness(text), t);
    const std::string h = "image_id,corruption,severity,model,correct\n";
    EXPECT_EQ(code_of([&] { parse_correctness(h + "a,clean,0,r,2\n"); }), Errc::MalformedRow);
    EXPECT_EQ(code_of([&] { parse_correctness(h + "a,clean,0,r,1\na,clean,0,r,0\n"); }), Errc::DuplicateKey);
}

TEST(Tables, FileRoundTrip) {
    const auto dir = oracle::temp_dir("tables");
    ScoreTable s;
    s.add({"a"}, "tv", 0.25);
    CorrectnessTable c;
    c.add({"a"}, "m", 1);
    write_scores(s, dir / "s.csv");
    write_correctness(c, dir / "c.csv");
    EXPECT_EQ(load_scores(dir / "s.csv"), s);
    EXPECT_EQ(load_correctness(dir / "c.csv"), c);
    EXPECT_EQ(s.metrics(), std::vector<std::string>{"tv"});
    EXPECT_EQ(c.models(), std::vector<std::string>{"m"});
}
