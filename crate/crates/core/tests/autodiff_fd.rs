mod common;

use common::fd_check;

#[test]
fn small_lenet() {
    fd_check(
        "data { batch = 2 shape = (1, 8, 8) classes = 3 }
net {
  cv1 = conv(k=3, out=2)
  cv2 = conv(k=2, out=3)
  mp = maxpool(k=2, stride=2)
  f = full(4)
  f2 = full(3)
  network = f2 . relu . f . flatten(4, 1) . mp . cv2 . mp . cv1
  loss = logloss . softmax . network
}",
    )
    .unwrap();
}

#[test]
fn reused_layer_and_weighted_loss() {
    fd_check(
        "data { batch = 2 shape = (2, 3, 3) classes = 3 }
net {
  flat = flatten(4, 1)
  f = full(3)
  a = f . relu . flat
  loss = logloss . softmax . a + 0.3 * logloss . softmax . f2 . a
  f2 = full(3)
}",
    )
    .unwrap();
}

#[test]
fn concat_avgpool_padding() {
    fd_check(
        "data { batch = 2 shape = (2, 5, 5) classes = 2 }
net {
  a = conv(1, 2)
  b = conv(3, 1, pad=1)
  p = avgpool(k=3, stride=1, pad=1)
  network = full(2) . flatten(4, 1) . p . concat(a, b . relu)
  loss = logloss . softmax . network
}",
    )
    .unwrap();
}

#[test]
fn dropout_strided_conv() {
    fd_check(
        "data { batch = 2 shape = (3, 7, 7) classes = 3 }
net {
  c = conv(k=3, out=4, stride=2, pad=1)
  network = full(3) . dropout(0.3) . relu . full(5) . flatten(4, 1) . maxpool(k=2, stride=1) . c
  loss = logloss . softmax . network
}",
    )
    .unwrap();
}
