#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "evsr/image.hpp"

using namespace evsr;

namespace {

std::filesystem::path temp_file(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "evsr_image_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("8-bit PGM round trip is exact on the quantization grid") {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> d(0, 255);
    Image img(13, 9);
    for (float& v : img.px)
        v = static_cast<float>(d(rng) / 255.0);

    auto path = temp_file("rt8.pgm");
    write_pgm(path, img);
    Image back = read_image(path);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(back.px[i] == img.px[i]);
}

TEST_CASE("16-bit PGM round trip") {
    Image img(4, 3);
    for (std::size_t i = 0; i < img.size(); ++i)
        img.px[i] = static_cast<float>(static_cast<double>(i * 4321 % 65536) / 65535.0);
    auto path = temp_file("rt16.pgm");
    write_pgm(path, img, true);
    Image back = read_image(path);
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back.px[i] - img.px[i]) < 1.0 / 65535.0);
}

TEST_CASE("PPM input collapses to luma") {
    auto path = temp_file("c.ppm");
    {
        std::FILE* f = std::fopen(path.string().c_str(), "wb");
        std::fputs("P6\n2 1\n255\n", f);
        unsigned char px[6] = {255, 0, 0, 0, 255, 0}; // red, green
        std::fwrite(px, 1, 6, f);
        std::fclose(f);
    }
    Image img = read_image(path);
    CHECK(img.at(0, 0) == doctest::Approx(0.299));
    CHECK(img.at(0, 1) == doctest::Approx(0.587));
}

TEST_CASE("box downsample averages blocks exactly") {
    Image img(4, 2);
    float vals[8] = {0.0f, 1.0f, 0.5f, 0.5f, 1.0f, 0.0f, 0.25f, 0.75f};
    std::copy(vals, vals + 8, img.px.begin());
    Image half = box_downsample(img, 2);
    REQUIRE(half.width == 2);
    REQUIRE(half.height == 1);
    CHECK(half.at(0, 0) == doctest::Approx(0.5));
    CHECK(half.at(0, 1) == doctest::Approx(0.5));
    CHECK_THROWS_AS(box_downsample(Image(5, 4), 2), ShapeError);
}

TEST_CASE("bilinear lookup is exact on the integer grid") {
    Image img(3, 3);
    for (std::size_t i = 0; i < 9; ++i)
        img.px[i] = static_cast<float>(i) * 0.1f;
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x)
            CHECK(bilinear_at(img, x, y) == static_cast<double>(img.at(y, x)));
    // midpoint interpolates
    CHECK(bilinear_at(img, 0.5, 0.0) == doctest::Approx(0.05));
    // out-of-range coordinates clamp
    CHECK(bilinear_at(img, -2.0, 0.0) == static_cast<double>(img.at(0, 0)));
}
