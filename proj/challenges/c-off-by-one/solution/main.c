#include <stdio.h>

#define DIGITS 10

int main(void)
{
  int counts[DIGITS];
  int c;

  for (int i = 0; i < DIGITS; i++)
    counts[i] = 0;
  while ((c = getchar()) != EOF) {
    if (c >= '0' && c <= '9')
      counts[c - '0']++;
  }
  for (int i = 0; i < DIGITS; i++) {
    if (counts[i] > 0)
      printf("%d %d\n", i, counts[i]);
  }
  return 0;
}
