// Stand-in external segmenter for handshake tests. Speaks the line protocol:
// reads "<image_path>\t<x0,y0,x1,y1[;...]>" on stdin, writes mask files under
// argv[1], and answers with the mask count and one "<path>\t<score>" line per
// box. A request whose image path contains "fail" yields an ERR line.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "smokeseg/mask_io.hpp"
#include "smokeseg/types.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: fake_teacher <out_dir>\n";
    return 2;
  }
  const std::string out_dir = argv[1];
  std::string line;
  int serial = 0;
  while (std::getline(std::cin, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      std::cout << "ERR\tbad request" << std::endl;
      continue;
    }
    const std::string image_path = line.substr(0, tab);
    if (image_path.find("fail") != std::string::npos) {
      std::cout << "ERR\tsynthetic failure" << std::endl;
      continue;
    }
    const cv::Mat image = cv::imread(image_path, cv::IMREAD_UNCHANGED);
    if (image.empty()) {
      std::cout << "ERR\tcannot read " << image_path << std::endl;
      continue;
    }

    std::vector<smokeseg::BoxAnnotation> boxes;
    std::stringstream boxes_str(line.substr(tab + 1));
    std::string token;
    while (std::getline(boxes_str, token, ';')) {
      smokeseg::BoxAnnotation b;
      if (std::sscanf(token.c_str(), "%d,%d,%d,%d", &b.x_min, &b.y_min, &b.x_max, &b.y_max) == 4) {
        boxes.push_back(b);
      }
    }

    std::cout << boxes.size() << "\n";
    for (const auto& b : boxes) {
      smokeseg::SegMask mask = smokeseg::SegMask::zeros(image.cols, image.rows);
      for (int y = b.y_min; y < b.y_max && y < image.rows; ++y) {
        for (int x = b.x_min; x < b.x_max && x < image.cols; ++x) mask.at(x, y) = 1;
      }
      const std::string path = out_dir + "/fake_mask_" + std::to_string(serial++) + ".png";
      smokeseg::write_mask(mask, path);
      std::cout << path << "\t0.9\n";
    }
    std::cout.flush();
  }
  return 0;
}
