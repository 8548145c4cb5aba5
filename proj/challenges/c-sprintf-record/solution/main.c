#include <stdio.h>

int main(void)
{
  char user[64];
  int id;
  char record[32];
  int n;

  if (scanf("%63s %d", user, &id) != 2)
    return 1;
  n = snprintf(record, sizeof record, "user=%s id=%d", user, id);
  if (n < 0 || (size_t)n >= sizeof record) {
    printf("error: record too long\n");
    return 1;
  }
  puts(record);
  return 0;
}
