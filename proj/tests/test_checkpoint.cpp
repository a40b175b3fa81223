#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "xflowdg/checkpoint.hpp"
#include "xflowdg/errors.hpp"
#include "xflowdg/rng.hpp"

using namespace xflowdg;

namespace {
const char* kPath = "/tmp/xflowdg_test_ckpt.xfc";
}

TEST_CASE("checkpoint round-trip is bit-exact, including NaN payloads") {
    Rng rng(1);
    NamedTensors entries;
    entries.emplace_back("weights.w", Tensor::normal({3, 4}, rng));
    entries.emplace_back("weights.b", Tensor::zeros({4}));
    entries.emplace_back("scalar", Tensor::scalar(-0.0));

    // arbitrary 64-bit patterns (rng words bit-cast to doubles) must survive
    Tensor words = Tensor::zeros({6});
    std::uint64_t raw[6] = {0xFFFFFFFFFFFFFFFFULL, 0x7FF8000000000001ULL, 0ULL,
                            42ULL, 0x8000000000000000ULL, 0xDEADBEEFCAFEBABEULL};
    std::memcpy(words.data(), raw, sizeof(raw));
    entries.emplace_back("rng.state", words);

    save_checkpoint(kPath, entries);
    NamedTensors back = load_checkpoint(kPath);
    REQUIRE(back.size() == entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        CHECK(back[i].first == entries[i].first);
        REQUIRE(back[i].second.shape() == entries[i].second.shape());
        // compare raw bits: NaNs and -0.0 must round-trip exactly
        const auto& a = entries[i].second;
        const auto& b = back[i].second;
        for (std::size_t j = 0; j < a.size(); ++j) {
            double va = a[j], vb = b[j];
            std::uint64_t ba, bb;
            std::memcpy(&ba, &va, 8);
            std::memcpy(&bb, &vb, 8);
            CHECK(ba == bb);
        }
    }
    std::remove(kPath);
}

TEST_CASE("empty table round-trips") {
    save_checkpoint(kPath, {});
    CHECK(load_checkpoint(kPath).empty());
    std::remove(kPath);
}

TEST_CASE("bad magic raises a format error with offset") {
    {
        std::ofstream f(kPath, std::ios::binary);
        f.write("NOPE", 4);
        std::uint32_t zero = 0;
        f.write(reinterpret_cast<const char*>(&zero), 4);
    }
    try {
        load_checkpoint(kPath);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
    }
    std::remove(kPath);
}

TEST_CASE("truncated checkpoint raises a format error") {
    NamedTensors entries;
    entries.emplace_back("x", Tensor::full({8}, 3.25));
    save_checkpoint(kPath, entries);
    std::ifstream in(kPath, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    for (std::size_t cut : {bytes.size() - 3, std::size_t(9), std::size_t(5)}) {
        std::ofstream out(kPath, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), std::streamsize(cut));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(kPath), FormatError);
    }
    // trailing garbage is also rejected
    std::ofstream out(kPath, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.write("junk", 4);
    out.close();
    CHECK_THROWS_AS(load_checkpoint(kPath), FormatError);
    std::remove(kPath);
}

TEST_CASE("find_entry and has_entry") {
    NamedTensors entries;
    entries.emplace_back("a", Tensor::scalar(1.0));
    entries.emplace_back("b", Tensor::scalar(2.0));
    CHECK(find_entry(entries, "b").item() == 2.0);
    CHECK(has_entry(entries, "a"));
    CHECK(!has_entry(entries, "c"));
    CHECK_THROWS_AS(find_entry(entries, "c"), StateError);
}

TEST_CASE("missing file raises an io error") {
    CHECK_THROWS_AS(load_checkpoint("/tmp/xflowdg_no_such_ckpt.xfc"), IoError);
}
